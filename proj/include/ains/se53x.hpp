#pragma once

#include "ains/strapdown.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ains {

// Z columns: v, p, q1, q2, q3. The truth has Q = [q1 q2 q3] = I.
struct Se53State {
  Rotation rot;
  Mat35 Z = Mat35::Zero();
};

enum class Se53Kind {
  GpsPosition,
  Landmark,
  Bearing,
  Tilt,
  Magnetometer,
  Pitot,
  Dvl,
  GpsVelocity,
  OpticalFlow,
  ZeroSideSlip,
};

const char* to_string(Se53Kind kind);

// Output y = H R^T Z r. `weight` is this row's block of the Riccati output gain Q.
struct Se53Measurement {
  Se53Kind kind = Se53Kind::GpsPosition;
  MatX H;
  Vec5 r = Vec5::Zero();
  VecX y;
  MatX weight;
};

struct RiccatiState {
  Mat15 P = Mat15::Identity();
  MatX Q_gain;
  Mat15 V_drive = Mat15::Identity();
};

struct Se53Gains {
  Vec3 rho{1.0, 1.2, 1.4};
  // Embedded inertial frame [e1 e2 e3]; simulation scaffolding, identity by construction.
  Mat3 frame = Mat3::Identity();
};

Mat5 se53_A(const Vec3& g = constants::kGravity);
Mat15 se53_F(const Vec3& omega, const Vec3& g = constants::kGravity);
MatX se53_measurement_row(const Se53Measurement& m);
VecX se53_predicted(const Se53Measurement& m, const Se53State& st);
// vec(R_hat^T (Z_hat - R_tilde Z)) against the truth (R, Z).
Vec15 se53_error(const Se53State& est, const Rotation& r, const Mat35& z);
Mat35 se53_truth_Z(const ExtendedPose& x);

// Table rows; each takes the raw sensor value and the row's known vectors.
Se53Measurement se53_gps_position(const Vec3& p_gps, const Vec3& lever);
Se53Measurement se53_gps_velocity(const Vec3& v_gps, const Vec3& omega_cross_lever);
Se53Measurement se53_landmark(const Vec3& y, const Vec3& landmark);
Se53Measurement se53_bearing(const Vec3& bearing, const Vec3& landmark);
Se53Measurement se53_tilt(double y, const Vec3& body_axis, const Vec3& inertial_axis);
Se53Measurement se53_magnetometer(const Vec3& y, const Vec3& r_m);
Se53Measurement se53_pitot(double y, const Vec3& v_wind);
Se53Measurement se53_dvl(const Vec3& y);
Se53Measurement se53_optical_flow(const Vec3& f);
Se53Measurement se53_zero_sideslip(const Vec3& v_wind);

RiccatiState riccati_step(const RiccatiState& rs, const Mat15& f, const MatX& c, double dt);

// Attitude innovation sum_i rho_i (q_hat_i x e_i).
Vec3 se53_attitude_innovation(const Se53State& st, const Se53Gains& gains);

struct Se53Derivative {
  Mat3 rot_dot;
  Mat35 z_dot;
};
// Observer vector field for a given translational correction u (15, body frame).
Se53Derivative se53_observer_field(const Se53State& st, const ImuSample& sample, const Vec15& u,
                                   const Se53Gains& gains, const Vec3& g = constants::kGravity);

using Se53Source = std::function<std::vector<Se53Measurement>(double t)>;

// One RK4 step; measurements are evaluated at the stage times.
std::pair<Se53State, RiccatiState> se53_observer_step(const Se53State& st, const RiccatiState& rs,
                                                      const ImuSample& sample,
                                                      const Se53Source& meas, double dt,
                                                      const Se53Gains& gains = {},
                                                      const Vec3& g = constants::kGravity);
std::pair<Se53State, RiccatiState> se53_observer_step(
    const Se53State& st, const RiccatiState& rs, const ImuSample& sample,
    const std::vector<Se53Measurement>& meas, double dt, const Se53Gains& gains = {},
    const Vec3& g = constants::kGravity);

// Condition number of sum_k Phi_k^T C_k^T C_k Phi_k dt, with Phi advanced by F_k.
double gramian_condition(const std::vector<Mat15>& f_seq, const std::vector<MatX>& c_seq,
                         double dt);

// ---------------------------------------------------------------- synchronous

using RowVec2 = Eigen::RowVector2d;

struct SyncState {
  ExtendedPose pose;
  Mat32 psi = Mat32::Zero();
  RowVec2 L{2.0, 3.0};
  double rho = 1.0;
};

Mat2 sync_closed_loop(const RowVec2& l);
// xi = R_tilde^T Z_tilde + (I - R_tilde^T) Psi
Mat32 sync_coupled_error(const SyncState& st, const ExtendedPose& truth);

using PositionSource = std::function<Vec3(double t)>;

SyncState sync_observer_step(const SyncState& st, const ImuSample& sample, const PositionSource& y,
                             double dt, const Vec3& g = constants::kGravity);
SyncState sync_observer_step(const SyncState& st, const ImuSample& sample, const Vec3& y,
                             double dt, const Vec3& g = constants::kGravity);

}  // namespace ains
