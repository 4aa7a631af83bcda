#pragma once

#include "ains/inekf.hpp"
#include "ains/se53x.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ains {

enum class TrajectoryKind { CircularPlanar, ConstantInput, Waypoints };

const char* to_string(TrajectoryKind kind);
std::optional<TrajectoryKind> trajectory_kind_from_string(std::string_view name);

struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::CircularPlanar;
  // CircularPlanar: counter-clockwise about +z starting at the origin heading +x.
  double radius = 20.0;  // m
  double speed = 3.0;    // m/s
  // ConstantInput: body-frame rate and specific force; start at (I, vel0, pos0).
  Vec3 omega = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
  Vec3 vel0 = Vec3::Zero();
  Vec3 pos0 = Vec3::Zero();
  // Waypoints: Catmull-Rom position spline, level attitude with yaw along the velocity.
  std::vector<double> knot_times;
  std::vector<Vec3> knots;
};

struct SensorConfig {
  SensorKind kind = SensorKind::GpsPosition;
  double rate = 10.0;       // Hz
  double noise_std = 0.0;   // per axis, in the sensor's unit
  Vec3 param = Vec3::Zero();
};

struct InitError {
  double attitude_deg = 10.0;
  double vel_std = 0.0;  // m/s per axis
  double pos_std = 0.0;  // m per axis
};

enum class FilterKind { InvEkf, InvEkfExt, Mekf, Se53, Sync };

const char* to_string(FilterKind kind);
std::optional<FilterKind> filter_kind_from_string(std::string_view name);

struct ObserverConfig {
  Vec3 rho{1.0, 1.2, 1.4};
  double riccati_p0 = 1.0;  // P(0) = p0 I
  double riccati_v = 1.0;   // V = v I
  double riccati_q = 1.0;   // output weight per row
  // se53: observe the embedded frame columns as body-frame outputs R^T e_i (simulation scaffolding).
  bool frame_outputs = true;
  RowVec2 sync_gain{2.0, 3.0};
  double sync_rho = 1.0;
};

struct Scenario {
  std::string name = "custom";
  Trajectory trajectory;
  double duration = 60.0;  // s
  double imu_rate = 100.0; // Hz
  ImuNoiseSpec noise;
  BiasState bias;          // true bias at t = 0
  std::vector<SensorConfig> sensors;
  InitError init_error;
  double p0 = 1.0;         // Sigma_0 = p0 I_9
  double bias_p0 = 1e-4;   // bias block of the augmented prior
  std::uint64_t seed = 0;
  int record_every = 10;   // IMU steps between RunRecord rows
  double fail_deg = 2.0;   // final attitude error counted as a failure
  bool joseph = false;
  // false: ideal IMU and exact measurements; filters keep their noise model
  bool inject_noise = true;
  ObserverConfig observer;

  double dt() const { return 1.0 / imu_rate; }
  long steps() const;
};

// Throws std::invalid_argument naming the offending field.
void validate(const Scenario& sc);

Scenario scenario_ex5(bool with_magnetometer);
Scenario scenario_fig3(double dt = 0.01);
Scenario scenario_fig6();
// fig3 | fig6 | ex5-gps | ex5-gpsmag. fig5 is not a Scenario (see BananaConfig).
std::optional<Scenario> preset(std::string_view name);
Vec3 ex5_magnetic_direction();

// ---------------------------------------------------------------- truth

struct TruthStream {
  double dt = 0.01;
  std::vector<ExtendedPose> states;  // N + 1 states at t_k = k dt
  std::vector<ImuSample> imu;        // N ideal samples, held over [t_k, t_k+1)
  // Exact state at any t in [0, N dt].
  ExtendedPose at(double t) const;
};

ExtendedPose circular_pose(double radius, double speed, double t);
TruthStream generate_truth(const Scenario& sc);

// ---------------------------------------------------------------- noise

struct NoisyImu {
  std::vector<ImuSample> samples;
  std::vector<BiasState> bias;  // true bias during each sample
};

// sample = ideal + b_k + n_k, n_k ~ N(0, PSD/dt); b_k+1 = b_k + N(0, PSD_b dt).
NoisyImu corrupt(const std::vector<ImuSample>& ideal, const ImuNoiseSpec& noise,
                 const BiasState& bias0, std::uint64_t seed, double dt);

// The scenario's IMU stream: corrupt() with the scenario's seed, or the ideal samples
// plus the initial bias when inject_noise is off.
NoisyImu scenario_imu(const Scenario& sc, const TruthStream& truth);

// Steps at which a sensor at `rate` fires: t = j / rate (j >= 1) snapped to the nearest
// IMU index, ties away from zero, dropping ticks past the end.
std::vector<long> sensor_schedule(double rate, double imu_rate, double duration);

struct TimedMeasurement {
  long step = 0;
  AidingMeasurement meas;
};

// Sorted by step, then catalogue order, then configuration order.
std::vector<TimedMeasurement> generate_measurements(const Scenario& sc, const TruthStream& truth,
                                                    std::uint64_t seed);

// Axis uniform on the sphere at the fixed angle; vel/pos offsets Gaussian.
ExtendedPose perturbed_start(const ExtendedPose& truth0, const InitError& err, std::uint64_t seed);

// ---------------------------------------------------------------- records

struct RunRow {
  double t = 0.0;
  double err_att = 0.0;  // rad
  double err_vel = 0.0;  // m/s
  double err_pos = 0.0;  // m
  double sig_att = 0.0;
  double sig_vel = 0.0;
  double sig_pos = 0.0;
  double nees = 0.0;
  ExtendedPose truth;
  ExtendedPose est;
};

struct InnovationStats {
  SensorKind kind = SensorKind::GpsPosition;
  long count = 0;
  double nis_sum = 0.0;
  double mean_nis() const { return count > 0 ? nis_sum / static_cast<double>(count) : 0.0; }
};

struct RunRecord {
  std::string scenario;
  FilterKind filter = FilterKind::InvEkf;
  std::uint64_t seed = 0;
  std::vector<RunRow> rows;
  std::vector<InnovationStats> innovations;
  bool aborted = false;
  std::string failure;

  double final_att() const;
};

// Runs the full loop; a NumericalError aborts the run and is recorded in `failure`.
RunRecord run_filter(const Scenario& sc, FilterKind filter);

double rotation_angle(const Mat3& r);

// ---------------------------------------------------------------- monte carlo

struct Quantiles {
  double p05 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

// Linear interpolation between order statistics (type 7). Empty input gives NaN.
double quantile(std::vector<double> values, double q);

struct McSummary {
  std::string scenario;
  FilterKind filter = FilterKind::InvEkf;
  std::uint64_t base_seed = 0;
  int runs = 0;
  int aborted = 0;
  int failures = 0;
  double fail_deg = 0.0;
  std::vector<double> t;
  std::vector<Quantiles> att, vel, pos;
  std::vector<double> mean_nees;
  std::vector<double> final_att;  // per run, rad; NaN when aborted
  double nees_window_start = 0.0;
  double nees_average = 0.0;      // mean of mean_nees over t >= nees_window_start
};

inline constexpr double kNeesWindowStart = 10.0;

// Run r uses seed base + r; outputs do not depend on `jobs`.
std::vector<RunRecord> monte_carlo_runs(const Scenario& sc, FilterKind filter, int runs, int jobs);
McSummary aggregate(const Scenario& sc, FilterKind filter, const std::vector<RunRecord>& records);
McSummary monte_carlo(const Scenario& sc, FilterKind filter, int runs, int jobs = 1);

// ---------------------------------------------------------------- banana

struct BananaConfig {
  std::vector<double> means_x{0.0, 10.0, 20.0, 30.0};
  int samples = 230;
  double yaw_std_deg = 10.0;
  double x_std = 0.8;
  double y_std = 1.6;
  std::uint64_t seed = 0;
};

struct PlanarSample {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

struct BananaSet {
  double mean_x = 0.0;
  std::vector<PlanarSample> direct;
  std::vector<PlanarSample> invariant;
  double bend_direct = 0.0;
  double bend_invariant = 0.0;
};

std::vector<BananaSet> banana(const BananaConfig& cfg);
// Quadratic coefficient of the minor-axis coordinate against the major-axis one,
// scaled by the major-axis variance (a length).
double pc_bend(const std::vector<Vec2>& pts);

// ---------------------------------------------------------------- fig6

struct Fig6Config {
  double dt = 0.05;
  int steps = 100;
  int runs = 500;
  double yaw_rate_std_deg = 20.0;  // per-sample std of the yaw-rate noise
  std::uint64_t seed = 0;
  int contour_points = 181;
};

struct ContourPoint {
  int circle = 0;
  double theta = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct Fig6Result {
  ExtendedPose mean_pose;  // noise-free propagation
  Mat9 propagated = Mat9::Zero();
  Mat9 sample = Mat9::Zero();
  double rel_frobenius = 0.0;
  std::vector<Vec2> endpoints;
  Vec2 endpoint_mean = Vec2::Zero();
  std::vector<ContourPoint> contours;
  std::vector<Vec2> ellipse;
};

Fig6Result fig6_monte_carlo(const Fig6Config& cfg);

// ---------------------------------------------------------------- fig3

struct Fig3Track {
  double dt = 0.0;
  std::vector<Vec3> exact;
  std::vector<Vec3> classical;
  double radius_err_exact = 0.0;
  double radius_err_classical = 0.0;
};

// One lap of ConstantInput(0.4 e3, (0, 2, -9.81)) from v0 = 5 e1.
Fig3Track fig3_track(double dt);

}  // namespace ains
