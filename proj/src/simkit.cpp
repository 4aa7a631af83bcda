#include "ains/simkit.hpp"

#include "ains/particles.hpp"
#include "ains/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace ains {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Mat3 rot_z(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

struct SplinePoint {
  Vec3 p, v, a;
};

SplinePoint eval_spline(const Trajectory& tr, double t) {
  const auto& ts = tr.knot_times;
  const auto& ps = tr.knots;
  const std::size_t n = ts.size();
  std::size_t i = 0;
  while (i + 2 < n && t > ts[i + 1]) ++i;
  auto tangent = [&](std::size_t j) -> Vec3 {
    if (j == 0) return (ps[1] - ps[0]) / (ts[1] - ts[0]);
    if (j == n - 1) return (ps[n - 1] - ps[n - 2]) / (ts[n - 1] - ts[n - 2]);
    return (ps[j + 1] - ps[j - 1]) / (ts[j + 1] - ts[j - 1]);
  };
  const double h = ts[i + 1] - ts[i];
  const double s = (t - ts[i]) / h;
  const Vec3 m0 = tangent(i) * h, m1 = tangent(i + 1) * h;
  const Vec3& p0 = ps[i];
  const Vec3& p1 = ps[i + 1];
  const double s2 = s * s, s3 = s2 * s;
  SplinePoint out;
  out.p = (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * p1 +
          (s3 - s2) * m1;
  out.v = ((6 * s2 - 6 * s) * p0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * p1 +
           (3 * s2 - 2 * s) * m1) /
          h;
  out.a = ((12 * s - 6) * p0 + (6 * s - 4) * m0 + (-12 * s + 6) * p1 + (6 * s - 2) * m1) / (h * h);
  return out;
}

double heading(const Vec3& v) {
  if (std::hypot(v.x(), v.y()) < 1e-6)
    throw std::invalid_argument("trajectory.knots: horizontal speed vanishes along the spline");
  return std::atan2(v.y(), v.x());
}

double heading_rate(const Vec3& v, const Vec3& a) {
  return (v.x() * a.y() - v.y() * a.x()) / (v.x() * v.x() + v.y() * v.y());
}

Vec3 scaled_normal(NoiseStream& s, const Vec3& std3) { return s.normal3().cwiseProduct(std3); }

Vec3 sqrt3(const Vec3& v) { return v.cwiseSqrt(); }

std::uint32_t sensor_channel(SensorKind kind, int occurrence) {
  return channel::kSensorBase + static_cast<std::uint32_t>(kind) +
         static_cast<std::uint32_t>(kSensorKindCount * occurrence);
}

}  // namespace

// ---------------------------------------------------------------- names

const char* to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::CircularPlanar: return "circular";
    case TrajectoryKind::ConstantInput: return "constant_input";
    case TrajectoryKind::Waypoints: return "waypoints";
  }
  return "?";
}

std::optional<TrajectoryKind> trajectory_kind_from_string(std::string_view name) {
  for (auto k : {TrajectoryKind::CircularPlanar, TrajectoryKind::ConstantInput,
                 TrajectoryKind::Waypoints})
    if (name == to_string(k)) return k;
  return std::nullopt;
}

const char* to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::InvEkf: return "invekf";
    case FilterKind::InvEkfExt: return "invekf_ext";
    case FilterKind::Mekf: return "mekf";
    case FilterKind::Se53: return "se53";
    case FilterKind::Sync: return "sync";
  }
  return "?";
}

std::optional<FilterKind> filter_kind_from_string(std::string_view name) {
  for (auto k : {FilterKind::InvEkf, FilterKind::InvEkfExt, FilterKind::Mekf, FilterKind::Se53,
                 FilterKind::Sync})
    if (name == to_string(k)) return k;
  return std::nullopt;
}

// ---------------------------------------------------------------- scenarios

long Scenario::steps() const { return std::lround(duration * imu_rate); }

void validate(const Scenario& sc) {
  if (!(sc.duration > 0.0)) throw std::invalid_argument("duration must be > 0");
  if (!(sc.imu_rate > 0.0)) throw std::invalid_argument("imu_rate must be > 0");
  if (sc.record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  if (!(sc.p0 > 0.0)) throw std::invalid_argument("p0 must be > 0");
  for (const auto& s : sc.sensors) {
    if (!(s.rate > 0.0) || s.rate > sc.imu_rate)
      throw std::invalid_argument(std::string("sensors.rate out of (0, imu_rate] for ") +
                                  to_string(s.kind));
    if (!(s.noise_std >= 0.0))
      throw std::invalid_argument(std::string("sensors.noise_std negative for ") +
                                  to_string(s.kind));
  }
  const auto& tr = sc.trajectory;
  if (tr.kind == TrajectoryKind::CircularPlanar && (!(tr.radius > 0.0) || !(tr.speed > 0.0)))
    throw std::invalid_argument("trajectory.radius and trajectory.speed must be > 0");
  if (tr.kind == TrajectoryKind::Waypoints) {
    if (tr.knots.size() < 2 || tr.knots.size() != tr.knot_times.size())
      throw std::invalid_argument("trajectory.knots: need >= 2 knots with matching knot_times");
    if (tr.knot_times.front() != 0.0 || tr.knot_times.back() < sc.duration)
      throw std::invalid_argument("trajectory.knot_times must span [0, duration]");
    for (std::size_t i = 1; i < tr.knot_times.size(); ++i)
      if (!(tr.knot_times[i] > tr.knot_times[i - 1]))
        throw std::invalid_argument("trajectory.knot_times must increase");
  }
}

Vec3 ex5_magnetic_direction() { return Vec3(0.5, 0.0, std::sqrt(3.0) / 2.0); }

Scenario scenario_ex5(bool with_magnetometer) {
  Scenario sc;
  sc.name = with_magnetometer ? "ex5-gpsmag" : "ex5-gps";
  sc.trajectory.kind = TrajectoryKind::CircularPlanar;
  sc.trajectory.radius = 20.0;
  sc.trajectory.speed = 3.0;
  sc.duration = 60.0;
  sc.imu_rate = 100.0;
  const double gyro = 0.2 * kDeg;
  const double accel = 0.05;
  sc.noise.gyro_psd = Vec3::Constant(gyro * gyro);
  sc.noise.accel_psd = Vec3::Constant(accel * accel);
  sc.sensors.push_back({SensorKind::GpsPosition, 10.0, 0.5, Vec3::Zero()});
  if (with_magnetometer)
    sc.sensors.push_back({SensorKind::Magnetometer, 20.0, 0.05, ex5_magnetic_direction()});
  sc.init_error = {10.0, 0.0, 0.0};
  sc.p0 = 1.0;
  return sc;
}

Scenario scenario_fig3(double dt) {
  Scenario sc;
  sc.name = "fig3";
  sc.trajectory.kind = TrajectoryKind::ConstantInput;
  sc.trajectory.omega = Vec3(0.0, 0.0, 0.4);
  sc.trajectory.accel = Vec3(0.0, 2.0, -9.81);
  sc.trajectory.vel0 = Vec3(5.0, 0.0, 0.0);
  sc.imu_rate = 1.0 / dt;
  sc.duration = 2.0 * std::numbers::pi / 0.4;
  sc.init_error = {0.0, 0.0, 0.0};
  return sc;
}

Scenario scenario_fig6() {
  Scenario sc;
  sc.name = "fig6";
  sc.trajectory.kind = TrajectoryKind::ConstantInput;
  sc.trajectory.accel = Vec3(1.0, 0.0, 0.0) - constants::kGravity;
  sc.imu_rate = 20.0;
  sc.duration = 5.0;
  const double sd = 20.0 * kDeg;
  // per-sample std sd  <=>  PSD = sd^2 dt
  sc.noise.gyro_psd = Vec3(0.0, 0.0, sd * sd / sc.imu_rate);
  sc.init_error = {0.0, 0.0, 0.0};
  sc.record_every = 1;
  return sc;
}

std::optional<Scenario> preset(std::string_view name) {
  if (name == "ex5-gps") return scenario_ex5(false);
  if (name == "ex5-gpsmag") return scenario_ex5(true);
  if (name == "fig3") return scenario_fig3();
  if (name == "fig6") return scenario_fig6();
  return std::nullopt;
}

// ---------------------------------------------------------------- truth

ExtendedPose circular_pose(double radius, double speed, double t) {
  const double w = speed / radius;
  const double th = w * t;
  ExtendedPose x;
  x.rot = Rotation(rot_z(th));
  x.vel = Vec3(speed * std::cos(th), speed * std::sin(th), 0.0);
  x.pos = Vec3(radius * std::sin(th), radius * (1.0 - std::cos(th)), 0.0);
  return x;
}

ExtendedPose TruthStream::at(double t) const {
  const long n = static_cast<long>(imu.size());
  long k = static_cast<long>(std::floor(t / dt));
  k = std::clamp(k, 0L, std::max(0L, n - 1));
  const double tau = t - static_cast<double>(k) * dt;
  if (tau == 0.0 || n == 0) return states[static_cast<std::size_t>(k)];
  return propagate_pose(states[static_cast<std::size_t>(k)], imu[static_cast<std::size_t>(k)],
                        BiasState{}, tau);
}

TruthStream generate_truth(const Scenario& sc) {
  validate(sc);
  TruthStream out;
  out.dt = sc.dt();
  const long n = sc.steps();
  const double dt = out.dt;
  const auto& tr = sc.trajectory;
  out.states.reserve(static_cast<std::size_t>(n) + 1);
  out.imu.reserve(static_cast<std::size_t>(n));

  switch (tr.kind) {
    case TrajectoryKind::CircularPlanar: {
      const double w = tr.speed / tr.radius;
      const Vec3 gyro(0.0, 0.0, w);
      // body frame keeps the velocity on +x, so the centripetal term sits on +y
      const Vec3 accel = Vec3(0.0, tr.speed * w, 0.0) - constants::kGravity;
      for (long k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt;
        out.states.push_back(circular_pose(tr.radius, tr.speed, t));
        if (k < n) out.imu.push_back({t, gyro, accel});
      }
      break;
    }
    case TrajectoryKind::ConstantInput: {
      ExtendedPose x{Rotation(), tr.vel0, tr.pos0};
      long counter = 0;
      out.states.push_back(x);
      for (long k = 0; k < n; ++k) {
        const ImuSample s{static_cast<double>(k) * dt, tr.omega, tr.accel};
        out.imu.push_back(s);
        x = propagate_pose(x, s, BiasState{}, dt);
        maintain_rotation(x, counter);
        out.states.push_back(x);
      }
      break;
    }
    case TrajectoryKind::Waypoints: {
      const SplinePoint s0 = eval_spline(tr, 0.0);
      ExtendedPose x{Rotation(rot_z(heading(s0.v))), s0.v, s0.p};
      long counter = 0;
      out.states.push_back(x);
      for (long k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        const SplinePoint m = eval_spline(tr, t + 0.5 * dt);
        const Vec3 gyro(0.0, 0.0, heading_rate(m.v, m.a));
        const Mat3 r_mid = x.rot.matrix() * so3::exp(0.5 * dt * gyro).matrix();
        const Vec3 accel = r_mid.transpose() * (m.a - constants::kGravity);
        const ImuSample s{t, gyro, accel};
        out.imu.push_back(s);
        x = propagate_pose(x, s, BiasState{}, dt);
        maintain_rotation(x, counter);
        out.states.push_back(x);
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------- noise

NoisyImu corrupt(const std::vector<ImuSample>& ideal, const ImuNoiseSpec& noise,
                 const BiasState& bias0, std::uint64_t seed, double dt) {
  NoiseStream gs(seed, channel::kGyro), as(seed, channel::kAccel);
  NoiseStream gbs(seed, channel::kGyroBias), abs(seed, channel::kAccelBias);
  const Vec3 sg = sqrt3(noise.gyro_psd / dt), sa = sqrt3(noise.accel_psd / dt);
  const Vec3 sbg = sqrt3(noise.gyro_bias_psd * dt), sba = sqrt3(noise.accel_bias_psd * dt);
  NoisyImu out;
  out.samples.reserve(ideal.size());
  out.bias.reserve(ideal.size());
  BiasState b = bias0;
  for (const ImuSample& s : ideal) {
    ImuSample m = s;
    m.gyro = s.gyro + b.gyro + scaled_normal(gs, sg);
    m.accel = s.accel + b.accel + scaled_normal(as, sa);
    out.samples.push_back(m);
    out.bias.push_back(b);
    b.gyro += scaled_normal(gbs, sbg);
    b.accel += scaled_normal(abs, sba);
  }
  return out;
}

NoisyImu scenario_imu(const Scenario& sc, const TruthStream& truth) {
  return corrupt(truth.imu, sc.inject_noise ? sc.noise : ImuNoiseSpec{}, sc.bias, sc.seed, truth.dt);
}

std::vector<long> sensor_schedule(double rate, double imu_rate, double duration) {
  std::vector<long> steps;
  const long last = std::lround(duration * imu_rate);
  for (long j = 1;; ++j) {
    const double t = static_cast<double>(j) / rate;
    const long k = std::lround(t * imu_rate);
    if (k > last) break;
    if (steps.empty() || steps.back() != k) steps.push_back(k);
  }
  return steps;
}

std::vector<TimedMeasurement> generate_measurements(const Scenario& sc, const TruthStream& truth,
                                                    std::uint64_t seed) {
  std::vector<TimedMeasurement> out;
  const long n = static_cast<long>(truth.imu.size());
  int occurrence[kSensorKindCount] = {};
  for (const SensorConfig& cfg : sc.sensors) {
    const int occ = occurrence[static_cast<int>(cfg.kind)]++;
    NoiseStream ns(seed, sensor_channel(cfg.kind, occ));
    const int dim = measurement_dim(cfg.kind);
    for (long k : sensor_schedule(cfg.rate, sc.imu_rate, sc.duration)) {
      TimedMeasurement tm;
      tm.step = k;
      AidingMeasurement& m = tm.meas;
      m.kind = cfg.kind;
      m.t = static_cast<double>(k) * truth.dt;
      m.param = cfg.param;
      if (n > 0) m.omega = truth.imu[static_cast<std::size_t>(std::min(k, n - 1))].gyro;
      m.value = measurement_model(m, truth.states[static_cast<std::size_t>(k)]);
      const double sd = sc.inject_noise ? cfg.noise_std : 0.0;
      for (int i = 0; i < dim; ++i) m.value(i) += sd * ns.normal();
      if (is_unit_vector_kind(cfg.kind)) {
        if (m.value.norm() < 1e-12)
          throw NumericalError(ErrorCode::DegenerateMeasurement, "zero unit-vector sample");
        m.value.normalize();
      }
      m.noise_cov = cfg.noise_std * cfg.noise_std * MatX::Identity(dim, dim);
      out.push_back(std::move(tm));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const TimedMeasurement& a, const TimedMeasurement& b) {
    if (a.step != b.step) return a.step < b.step;
    return static_cast<int>(a.meas.kind) < static_cast<int>(b.meas.kind);
  });
  return out;
}

ExtendedPose perturbed_start(const ExtendedPose& truth0, const InitError& err,
                             std::uint64_t seed) {
  NoiseStream s(seed, channel::kInit);
  const Vec3 axis = random_unit_vector(s);
  const Vec3 dv = s.normal3() * err.vel_std;
  const Vec3 dp = s.normal3() * err.pos_std;
  ExtendedPose x = truth0;
  x.rot = so3::exp(axis * (err.attitude_deg * kDeg)) * truth0.rot;
  x.vel += dv;
  x.pos += dp;
  return x;
}

// ---------------------------------------------------------------- runs

double rotation_angle(const Mat3& r) {
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const Vec3 s(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * s.norm(), c);
}

double RunRecord::final_att() const {
  if (aborted || rows.empty()) return kNaN;
  return rows.back().err_att;
}

namespace {

struct RunContext {
  const Scenario& sc;
  TruthStream truth;
  NoisyImu imu;
  std::vector<TimedMeasurement> meas;
  ExtendedPose start;
  long n = 0;
  double dt = 0.0;

  bool record_step(long k) const { return k % sc.record_every == 0 || k == n; }
};

RunRow base_row(const RunContext& ctx, long k, const ExtendedPose& est) {
  RunRow row;
  row.t = static_cast<double>(k) * ctx.dt;
  row.truth = ctx.truth.states[static_cast<std::size_t>(k)];
  row.est = est;
  row.err_att = rotation_angle(est.rot.matrix() * row.truth.rot.matrix().transpose());
  row.err_vel = (est.vel - row.truth.vel).norm();
  row.err_pos = (est.pos - row.truth.pos).norm();
  row.sig_att = row.sig_vel = row.sig_pos = row.nees = kNaN;
  return row;
}

void set_sigmas(RunRow& row, const Mat9& euclid) {
  row.sig_att = std::sqrt(euclid.block<3, 3>(0, 0).trace());
  row.sig_vel = std::sqrt(euclid.block<3, 3>(3, 3).trace());
  row.sig_pos = std::sqrt(euclid.block<3, 3>(6, 6).trace());
}

double mahalanobis(const VecX& e, const MatX& cov) {
  Eigen::LDLT<MatX> ldlt(cov);
  if (ldlt.info() != Eigen::Success) return kNaN;
  return e.dot(ldlt.solve(e));
}

void track_nis(RunRecord& rec, SensorKind kind, const LinearizedUpdate& upd, const MatX& cov) {
  const MatX s = upd.H * cov * upd.H.transpose() + upd.V;
  const double nis = mahalanobis(upd.z, s);
  for (auto& st : rec.innovations) {
    if (st.kind == kind) {
      ++st.count;
      st.nis_sum += nis;
      return;
    }
  }
}

Vec9 invariant_error(const ExtendedPose& est, const ExtendedPose& truth) {
  return se23::log(est * truth.inverse());
}

Vec9 mekf_error(const ExtendedPose& est, const ExtendedPose& truth) {
  Vec9 e;
  e << so3::log(est.rot * truth.rot.inverse()), truth.vel - est.vel, truth.pos - est.pos;
  return e;
}

AidingMeasurement with_rate(const TimedMeasurement& tm, const RunContext& ctx, const Vec3& bg) {
  AidingMeasurement m = tm.meas;
  if (tm.step < ctx.n) m.omega = ctx.imu.samples[static_cast<std::size_t>(tm.step)].gyro - bg;
  return m;
}

double nees9(const Vec9& e, const Mat9& p) { return mahalanobis(e, p); }

void run_invekf(const RunContext& ctx, RunRecord& rec) {
  const CovarianceUpdate form = ctx.sc.joseph ? CovarianceUpdate::Joseph : CovarianceUpdate::Standard;
  NavBelief b{ctx.start, ctx.sc.p0 * Mat9::Identity()};
  std::size_t mi = 0;
  long counter = 0;
  for (long k = 0; k <= ctx.n; ++k) {
    for (; mi < ctx.meas.size() && ctx.meas[mi].step == k; ++mi) {
      const AidingMeasurement m = with_rate(ctx.meas[mi], ctx, Vec3::Zero());
      const LinearizedUpdate upd = linearize(m, b.pose);
      track_nis(rec, m.kind, upd, b.cov);
      b = correct(b, upd, form);
    }
    if (ctx.record_step(k)) {
      RunRow row = base_row(ctx, k, b.pose);
      const Mat9 t = invariant_to_euclidean(b.pose);
      set_sigmas(row, t * b.cov * t.transpose());
      try {
        row.nees = nees9(invariant_error(b.pose, row.truth), b.cov);
      } catch (const NumericalError&) {
        row.nees = kNaN;
      }
      rec.rows.push_back(row);
    }
    if (k < ctx.n) {
      b = propagate(b, ctx.imu.samples[static_cast<std::size_t>(k)], ctx.sc.noise, ctx.dt);
      maintain_rotation(b.pose, counter);
    }
  }
}

void run_invekf_ext(const RunContext& ctx, RunRecord& rec) {
  const CovarianceUpdate form = ctx.sc.joseph ? CovarianceUpdate::Joseph : CovarianceUpdate::Standard;
  NavBeliefExt b;
  b.pose = ctx.start;
  b.cov = Mat15::Identity() * ctx.sc.bias_p0;
  b.cov.topLeftCorner<9, 9>() = ctx.sc.p0 * Mat9::Identity();
  std::size_t mi = 0;
  long counter = 0;
  for (long k = 0; k <= ctx.n; ++k) {
    for (; mi < ctx.meas.size() && ctx.meas[mi].step == k; ++mi) {
      const AidingMeasurement m = with_rate(ctx.meas[mi], ctx, b.bias.gyro);
      const LinearizedUpdate upd = linearize(m, b.pose);
      track_nis(rec, m.kind, upd, b.cov.topLeftCorner<9, 9>());
      b = correct_ext(b, upd, form);
    }
    if (ctx.record_step(k)) {
      RunRow row = base_row(ctx, k, b.pose);
      const Mat9 t = invariant_to_euclidean(b.pose);
      set_sigmas(row, t * b.cov.topLeftCorner<9, 9>() * t.transpose());
      const std::size_t bi = static_cast<std::size_t>(std::min(k, ctx.n - 1));
      const BiasState& tb = ctx.imu.bias[bi];
      try {
        VecX e(15);
        e << invariant_error(b.pose, row.truth), tb.gyro - b.bias.gyro, tb.accel - b.bias.accel;
        row.nees = mahalanobis(e, b.cov);
      } catch (const NumericalError&) {
        row.nees = kNaN;
      }
      rec.rows.push_back(row);
    }
    if (k < ctx.n) {
      b = propagate_ext(b, ctx.imu.samples[static_cast<std::size_t>(k)], ctx.sc.noise, ctx.dt);
      maintain_rotation(b.pose, counter);
    }
  }
}

void run_mekf(const RunContext& ctx, RunRecord& rec) {
  const CovarianceUpdate form = ctx.sc.joseph ? CovarianceUpdate::Joseph : CovarianceUpdate::Standard;
  MekfBelief b{ctx.start, ctx.sc.p0 * Mat9::Identity()};
  std::size_t mi = 0;
  long counter = 0;
  for (long k = 0; k <= ctx.n; ++k) {
    for (; mi < ctx.meas.size() && ctx.meas[mi].step == k; ++mi) {
      const AidingMeasurement m = with_rate(ctx.meas[mi], ctx, Vec3::Zero());
      track_nis(rec, m.kind, mekf_linearize(m, b.pose), b.cov);
      b = mekf_correct(b, m, form);
    }
    if (ctx.record_step(k)) {
      RunRow row = base_row(ctx, k, b.pose);
      set_sigmas(row, b.cov);
      try {
        row.nees = nees9(mekf_error(b.pose, row.truth), b.cov);
      } catch (const NumericalError&) {
        row.nees = kNaN;
      }
      rec.rows.push_back(row);
    }
    if (k < ctx.n) {
      b = mekf_step(b, ctx.imu.samples[static_cast<std::size_t>(k)], ctx.sc.noise, ctx.dt);
      maintain_rotation(b.pose, counter);
    }
  }
}

// Continuous-output sensors for the observers: every sensor is sampled at each
// RK4 stage with its noise held over the IMU step.
struct ObserverSensor {
  SensorConfig cfg;
  NoiseStream stream;
  Vec3 held = Vec3::Zero();
};

std::vector<ObserverSensor> observer_sensors(const Scenario& sc, bool sync) {
  std::vector<ObserverSensor> out;
  int occurrence[kSensorKindCount] = {};
  for (const SensorConfig& cfg : sc.sensors) {
    const int occ = occurrence[static_cast<int>(cfg.kind)]++;
    bool ok = false;
    switch (cfg.kind) {
      case SensorKind::GpsPosition:
        ok = true;
        break;
      case SensorKind::GpsVelocity:
      case SensorKind::Magnetometer:
      case SensorKind::Landmark:
      case SensorKind::Dvl:
        ok = !sync;
        break;
      default:
        break;
    }
    if (!ok)
      throw std::invalid_argument(std::string("sensor ") + to_string(cfg.kind) +
                                  " is not supported by the " + (sync ? "sync" : "se53") +
                                  " observer");
    out.push_back({cfg, NoiseStream(sc.seed, sensor_channel(cfg.kind, occ)), Vec3::Zero()});
  }
  if (sync && (out.size() != 1 || !out[0].cfg.param.isZero()))
    throw std::invalid_argument("sync observer needs exactly one GpsPosition sensor without lever arm");
  return out;
}

Se53Measurement se53_from_truth(const ObserverSensor& s, const ExtendedPose& x, const Vec3& omega,
                                double weight) {
  const Mat3& r = x.rot.matrix();
  const Vec3& prm = s.cfg.param;
  Se53Measurement m;
  switch (s.cfg.kind) {
    case SensorKind::GpsPosition:
      m = se53_gps_position(x.pos + r * prm + s.held, prm);
      break;
    case SensorKind::GpsVelocity:
      m = se53_gps_velocity(x.vel + r * omega.cross(prm) + s.held, omega.cross(prm));
      break;
    case SensorKind::Magnetometer:
      m = se53_magnetometer(r.transpose() * prm + s.held, prm);
      break;
    case SensorKind::Landmark:
      m = se53_landmark(r.transpose() * (prm - x.pos) + s.held, prm);
      break;
    case SensorKind::Dvl:
      m = se53_dvl(r.transpose() * x.vel + s.held);
      break;
    default:
      throw std::invalid_argument("unsupported observer sensor");
  }
  m.weight = weight * MatX::Identity(m.H.rows(), m.H.rows());
  return m;
}

void run_se53(const RunContext& ctx, RunRecord& rec) {
  const ObserverConfig& oc = ctx.sc.observer;
  std::vector<ObserverSensor> sensors = observer_sensors(ctx.sc, false);
  Se53State st;
  st.rot = ctx.start.rot;
  st.Z = se53_truth_Z(ctx.start);
  RiccatiState rs;
  rs.P = oc.riccati_p0 * Mat15::Identity();
  rs.V_drive = oc.riccati_v * Mat15::Identity();
  const Se53Gains gains{oc.rho, Mat3::Identity()};

  auto estimate = [&]() {
    return ExtendedPose{st.rot, st.Z.col(0), st.Z.col(1)};
  };
  for (long k = 0; k <= ctx.n; ++k) {
    if (ctx.record_step(k)) rec.rows.push_back(base_row(ctx, k, estimate()));
    if (k == ctx.n) break;
    for (auto& s : sensors) s.held = s.stream.normal3() * (ctx.sc.inject_noise ? s.cfg.noise_std : 0.0);
    const ImuSample& sample = ctx.imu.samples[static_cast<std::size_t>(k)];
    const Vec3 omega = sample.gyro;
    const Se53Source source = [&](double tau) {
      const ExtendedPose x = ctx.truth.at(tau);
      std::vector<Se53Measurement> out;
      out.reserve(sensors.size());
      for (const auto& s : sensors) out.push_back(se53_from_truth(s, x, omega, oc.riccati_q));
      if (oc.frame_outputs) {
        for (int i = 0; i < 3; ++i) {
          const Vec3 e = gains.frame.col(i);
          Se53Measurement m = se53_magnetometer(x.rot.matrix().transpose() * e, e);
          m.weight = oc.riccati_q * Mat3::Identity();
          out.push_back(std::move(m));
        }
      }
      return out;
    };
    std::tie(st, rs) = se53_observer_step(st, rs, sample, source, ctx.dt, gains);
  }
}

void run_sync(const RunContext& ctx, RunRecord& rec) {
  const ObserverConfig& oc = ctx.sc.observer;
  std::vector<ObserverSensor> sensors = observer_sensors(ctx.sc, true);
  SyncState st;
  st.pose = ctx.start;
  st.psi << ctx.start.vel, ctx.start.pos;
  st.L = oc.sync_gain;
  st.rho = oc.sync_rho;
  for (long k = 0; k <= ctx.n; ++k) {
    if (ctx.record_step(k)) rec.rows.push_back(base_row(ctx, k, st.pose));
    if (k == ctx.n) break;
    auto& s = sensors[0];
    s.held = s.stream.normal3() * (ctx.sc.inject_noise ? s.cfg.noise_std : 0.0);
    const PositionSource y = [&](double tau) { return Vec3(ctx.truth.at(tau).pos + s.held); };
    st = sync_observer_step(st, ctx.imu.samples[static_cast<std::size_t>(k)], y, ctx.dt);
  }
}

}  // namespace

RunRecord run_filter(const Scenario& sc, FilterKind filter) {
  validate(sc);
  RunRecord rec;
  rec.scenario = sc.name;
  rec.filter = filter;
  rec.seed = sc.seed;
  RunContext ctx{sc, generate_truth(sc), {}, {}, {}, sc.steps(), sc.dt()};
  ctx.imu = scenario_imu(sc, ctx.truth);
  ctx.meas = generate_measurements(sc, ctx.truth, sc.seed);
  ctx.start = perturbed_start(ctx.truth.states[0], sc.init_error, sc.seed);
  for (int k = 0; k < kSensorKindCount; ++k) {
    const auto kind = static_cast<SensorKind>(k);
    for (const auto& s : sc.sensors) {
      if (s.kind == kind) {
        rec.innovations.push_back({kind, 0, 0.0});
        break;
      }
    }
  }
  try {
    switch (filter) {
      case FilterKind::InvEkf: run_invekf(ctx, rec); break;
      case FilterKind::InvEkfExt: run_invekf_ext(ctx, rec); break;
      case FilterKind::Mekf: run_mekf(ctx, rec); break;
      case FilterKind::Se53: run_se53(ctx, rec); break;
      case FilterKind::Sync: run_sync(ctx, rec); break;
    }
  } catch (const NumericalError& e) {
    rec.aborted = true;
    rec.failure = std::string(to_string(e.code())) + ": " + e.what();
  }
  return rec;
}

// ---------------------------------------------------------------- monte carlo

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<RunRecord> monte_carlo_runs(const Scenario& sc, FilterKind filter, int runs,
                                        int jobs) {
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  validate(sc);
  std::vector<RunRecord> out(static_cast<std::size_t>(runs));
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min(jobs, runs);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int r = next++; r < runs; r = next++) {
      Scenario s = sc;
      s.seed = sc.seed + static_cast<std::uint64_t>(r);
      out[static_cast<std::size_t>(r)] = run_filter(s, filter);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

McSummary aggregate(const Scenario& sc, FilterKind filter,
                    const std::vector<RunRecord>& records) {
  McSummary s;
  s.scenario = sc.name;
  s.filter = filter;
  s.base_seed = sc.seed;
  s.runs = static_cast<int>(records.size());
  s.fail_deg = sc.fail_deg;
  s.nees_window_start = kNeesWindowStart;
  const double fail_rad = sc.fail_deg * kDeg;

  std::size_t rows = 0;
  for (const auto& r : records) rows = std::max(rows, r.rows.size());
  for (const auto& r : records) {
    if (r.aborted) ++s.aborted;
    const double f = r.final_att();
    s.final_att.push_back(f);
    if (r.aborted || !(f <= fail_rad)) ++s.failures;
  }
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> a, v, p;
    double nees_sum = 0.0;
    int nees_n = 0;
    double t = kNaN;
    for (const auto& r : records) {
      if (r.aborted || i >= r.rows.size()) continue;
      const RunRow& row = r.rows[i];
      t = row.t;
      a.push_back(row.err_att);
      v.push_back(row.err_vel);
      p.push_back(row.err_pos);
      if (std::isfinite(row.nees)) {
        nees_sum += row.nees;
        ++nees_n;
      }
    }
    if (a.empty()) continue;
    s.t.push_back(t);
    s.att.push_back({quantile(a, 0.05), quantile(a, 0.5), quantile(a, 0.95)});
    s.vel.push_back({quantile(v, 0.05), quantile(v, 0.5), quantile(v, 0.95)});
    s.pos.push_back({quantile(p, 0.05), quantile(p, 0.5), quantile(p, 0.95)});
    s.mean_nees.push_back(nees_n > 0 ? nees_sum / nees_n : kNaN);
  }
  double acc = 0.0;
  int cnt = 0;
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    if (s.t[i] >= s.nees_window_start && std::isfinite(s.mean_nees[i])) {
      acc += s.mean_nees[i];
      ++cnt;
    }
  }
  s.nees_average = cnt > 0 ? acc / cnt : kNaN;
  return s;
}

McSummary monte_carlo(const Scenario& sc, FilterKind filter, int runs, int jobs) {
  return aggregate(sc, filter, monte_carlo_runs(sc, filter, runs, jobs));
}

// ---------------------------------------------------------------- banana

double pc_bend(const std::vector<Vec2>& pts) {
  const std::size_t n = pts.size();
  if (n < 4) return 0.0;
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(n);
  Mat2 c = Mat2::Zero();
  for (const auto& p : pts) c += (p - mean) * (p - mean).transpose();
  c /= static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Mat2> es(c);
  const Vec2 major = es.eigenvectors().col(1);
  const Vec2 minor = es.eigenvectors().col(0);
  MatX a(n, 3);
  VecX b(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (pts[i] - mean).dot(major);
    a(static_cast<Eigen::Index>(i), 0) = 1.0;
    a(static_cast<Eigen::Index>(i), 1) = s;
    a(static_cast<Eigen::Index>(i), 2) = s * s;
    b(static_cast<Eigen::Index>(i)) = (pts[i] - mean).dot(minor);
    var += s * s;
  }
  var /= static_cast<double>(n - 1);
  const VecX coef = a.colPivHouseholderQr().solve(b);
  return std::abs(coef(2)) * var;
}

std::vector<BananaSet> banana(const BananaConfig& cfg) {
  std::vector<BananaSet> out;
  for (std::size_t j = 0; j < cfg.means_x.size(); ++j) {
    NoiseStream s(cfg.seed, channel::kSampling, static_cast<std::uint32_t>(j));
    BananaSet set;
    set.mean_x = cfg.means_x[j];
    const ExtendedPose mean{Rotation(), Vec3::Zero(), Vec3(set.mean_x, 0.0, 0.0)};
    std::vector<Vec2> dp, ip;
    for (int i = 0; i < cfg.samples; ++i) {
      const double dyaw = cfg.yaw_std_deg * kDeg * s.normal();
      const double dx = cfg.x_std * s.normal();
      const double dy = cfg.y_std * s.normal();
      set.direct.push_back({set.mean_x + dx, dy, dyaw});
      Vec9 xi = Vec9::Zero();
      xi(2) = dyaw;
      xi(6) = dx;
      xi(7) = dy;
      const ExtendedPose x = se23::exp(-xi) * mean;
      const Mat3& r = x.rot.matrix();
      set.invariant.push_back({x.pos.x(), x.pos.y(), std::atan2(r(1, 0), r(0, 0))});
      dp.emplace_back(set.mean_x + dx, dy);
      ip.emplace_back(x.pos.x(), x.pos.y());
    }
    set.bend_direct = pc_bend(dp);
    set.bend_invariant = pc_bend(ip);
    out.push_back(std::move(set));
  }
  return out;
}

// ---------------------------------------------------------------- fig6

Fig6Result fig6_monte_carlo(const Fig6Config& cfg) {
  if (cfg.runs < 2 || cfg.steps < 1 || !(cfg.dt > 0.0))
    throw std::invalid_argument("fig6: runs >= 2, steps >= 1, dt > 0 required");
  const double sd = cfg.yaw_rate_std_deg * kDeg;
  const Vec3 accel = Vec3(1.0, 0.0, 0.0) - constants::kGravity;
  ImuNoiseSpec noise;
  noise.gyro_psd = Vec3(0.0, 0.0, sd * sd * cfg.dt);

  Fig6Result res;
  NavBelief b{ExtendedPose::identity(), Mat9::Zero()};
  const ImuSample nominal{0.0, Vec3::Zero(), accel};

  const auto n = static_cast<std::size_t>(cfg.runs);
  ParticleSet set(n);
  ParticleInputs in(n);
  for (std::size_t i = 0; i < n; ++i) {
    in.accel[0][i] = accel.x();
    in.accel[1][i] = accel.y();
    in.accel[2][i] = accel.z();
  }
  std::vector<NoiseStream> streams;
  streams.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    streams.emplace_back(cfg.seed, channel::kGyro, static_cast<std::uint32_t>(i));

  for (int k = 0; k < cfg.steps; ++k) {
    b = propagate(b, nominal, noise, cfg.dt);
    for (std::size_t i = 0; i < n; ++i) in.gyro[2][i] = sd * streams[i].normal();
    propagate_particles(set, in, cfg.dt);
  }
  res.mean_pose = b.pose;
  res.propagated = b.cov;

  std::vector<Vec9> xs(n);
  Vec9 mean = Vec9::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const ExtendedPose x = set.get(i);
    xs[i] = se23::log(b.pose * x.inverse());
    mean += xs[i];
    res.endpoints.emplace_back(x.pos.x(), x.pos.y());
    res.endpoint_mean += res.endpoints.back();
  }
  mean /= static_cast<double>(n);
  res.endpoint_mean /= static_cast<double>(n);
  for (const auto& x : xs) res.sample += (x - mean) * (x - mean).transpose();
  res.sample /= static_cast<double>(n - 1);
  res.rel_frobenius = (res.sample - res.propagated).norm() / res.propagated.norm();

  // principal circles of the 3-sigma ellipsoid through exp, projected on (px, py)
  Eigen::SelfAdjointEigenSolver<Mat9> es(res.propagated);
  const int np = std::max(cfg.contour_points, 3);
  const int pairs[3][2] = {{8, 7}, {8, 6}, {7, 6}};
  for (int c = 0; c < 3; ++c) {
    const int i = pairs[c][0], j = pairs[c][1];
    const Vec9 ui = es.eigenvectors().col(i) * std::sqrt(std::max(0.0, es.eigenvalues()(i)));
    const Vec9 uj = es.eigenvectors().col(j) * std::sqrt(std::max(0.0, es.eigenvalues()(j)));
    for (int q = 0; q < np; ++q) {
      const double th = 2.0 * std::numbers::pi * q / (np - 1);
      const Vec9 xi = 3.0 * (std::cos(th) * ui + std::sin(th) * uj);
      const ExtendedPose x = se23::exp(-xi) * b.pose;
      res.contours.push_back({c, th, x.pos.x(), x.pos.y()});
    }
  }

  Mat2 c2 = Mat2::Zero();
  for (const auto& p : res.endpoints) c2 += (p - res.endpoint_mean) * (p - res.endpoint_mean).transpose();
  c2 /= static_cast<double>(n - 1);
  const Mat2 l = Eigen::LLT<Mat2>(c2).matrixL();
  for (int q = 0; q < np; ++q) {
    const double th = 2.0 * std::numbers::pi * q / (np - 1);
    res.ellipse.push_back(res.endpoint_mean + 3.0 * l * Vec2(std::cos(th), std::sin(th)));
  }
  return res;
}

// ---------------------------------------------------------------- fig3

Fig3Track fig3_track(double dt) {
  const Vec3 gyro(0.0, 0.0, 0.4);
  const Vec3 accel(0.0, 2.0, -9.81);
  const Vec3 center(0.0, 12.5, 0.0);
  const double radius = 12.5;
  const long n = std::lround(2.0 * std::numbers::pi / 0.4 / dt);
  Fig3Track tr;
  tr.dt = dt;
  ExtendedPose xe{Rotation(), Vec3(5.0, 0.0, 0.0), Vec3::Zero()};
  ExtendedPose xc = xe;
  tr.exact.push_back(xe.pos);
  tr.classical.push_back(xc.pos);
  const ImuSample s{0.0, gyro, accel};
  for (long k = 0; k < n; ++k) {
    xe = propagate_pose(xe, s, BiasState{}, dt);
    xc = gravity_increment(dt) * kinematic_increment(xc, dt) *
         imu_increment_classical(gyro, accel, dt);
    tr.exact.push_back(xe.pos);
    tr.classical.push_back(xc.pos);
  }
  tr.radius_err_exact = std::abs((xe.pos - center).norm() - radius);
  tr.radius_err_classical = std::abs((xc.pos - center).norm() - radius);
  return tr;
}

}  // namespace ains
