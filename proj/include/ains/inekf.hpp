#pragma once

#include "ains/strapdown.hpp"

#include <optional>
#include <string_view>

namespace ains {

// Catalogue order; also the order of simultaneous updates and of RNG channels.
enum class SensorKind {
  GpsPosition,
  GpsVelocity,
  Magnetometer,
  Landmark,
  Dvl,
  Barometer,
  RangeToAnchor,
  PitotTube,
  OpticalFlow,
  BearingToFeature,
  TiltAngle,
  ZeroLateralVelocity,
};

inline constexpr int kSensorKindCount = 12;

const char* to_string(SensorKind kind);
std::optional<SensorKind> sensor_kind_from_string(std::string_view name);
int measurement_dim(SensorKind kind);
// Kinds whose value is a unit direction.
bool is_unit_vector_kind(SensorKind kind);
// Kinds with an implicit zero measurement.
bool is_pseudo_kind(SensorKind kind);

// `param` carries the kind's fixed vector: lever arm (GPS), r_m (magnetometer),
// p_l (landmark, bearing), p_a (range), v_wind (pitot). `omega` is the body rate
// used by the GPS-velocity lever-arm term.
struct AidingMeasurement {
  SensorKind kind = SensorKind::GpsPosition;
  double t = 0.0;
  VecX value;
  MatX noise_cov;
  Vec3 param = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
};

enum class Invariance { Right, Left, Generic };

struct LinearizedUpdate {
  MatX H;
  VecX z;
  MatX V;
  Invariance tag = Invariance::Generic;
};

// Noise-free sensor output at state x (pseudo kinds return their constraint value).
VecX measurement_model(const AidingMeasurement& meas, const ExtendedPose& x);

Invariance invariance_of(SensorKind kind);

LinearizedUpdate linearize(const AidingMeasurement& meas, const ExtendedPose& xhat);
inline LinearizedUpdate linearize(const AidingMeasurement& meas, const NavBelief& belief) {
  return linearize(meas, belief.pose);
}

enum class CovarianceUpdate { Standard, Joseph };

NavBelief correct(const NavBelief& belief, const LinearizedUpdate& upd,
                  CovarianceUpdate form = CovarianceUpdate::Standard);
NavBeliefExt correct_ext(const NavBeliefExt& belief, const LinearizedUpdate& upd,
                         CovarianceUpdate form = CovarianceUpdate::Standard);

// Mahalanobis gate at the chi-square quantile `probability` (e.g. 0.999).
bool passes_gate(const LinearizedUpdate& upd, const MatX& cov, double probability);

// Shared Kalman step on an arbitrary error state.
struct KalmanStep {
  VecX delta;
  MatX cov;
};
KalmanStep kalman_update(const MatX& cov, const MatX& H, const VecX& z, const MatX& V,
                         CovarianceUpdate form = CovarianceUpdate::Standard);

// Multiplicative EKF baseline: error (theta, dv, dp) with R_tilde = R_hat R^T,
// dv = v - v_hat, dp = p - p_hat.
struct MekfBelief {
  ExtendedPose pose;
  Mat9 cov = Mat9::Zero();
};

MekfBelief mekf_step(const MekfBelief& belief, const ImuSample& sample, const ImuNoiseSpec& noise,
                     double dt, const Vec3& g = constants::kGravity);
LinearizedUpdate mekf_linearize(const AidingMeasurement& meas, const ExtendedPose& xhat);
MekfBelief mekf_correct(const MekfBelief& belief, const AidingMeasurement& meas,
                        CovarianceUpdate form = CovarianceUpdate::Standard);

// First-order map from right-invariant coordinates to (theta, dv, dp); an involution.
Mat9 invariant_to_euclidean(const ExtendedPose& xhat);

}  // namespace ains
