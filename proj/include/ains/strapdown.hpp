#pragma once

#include "ains/liegroups.hpp"

#include <optional>

namespace ains {

struct ImuSample {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

// Continuous-time noise intensities, per axis.
struct ImuNoiseSpec {
  Vec3 gyro_psd = Vec3::Zero();        // (rad/s)^2/Hz
  Vec3 accel_psd = Vec3::Zero();       // (m/s^2)^2/Hz
  Vec3 gyro_bias_psd = Vec3::Zero();   // (rad/s^2)^2/Hz
  Vec3 accel_bias_psd = Vec3::Zero();  // (m/s^3)^2/Hz
};

struct BiasState {
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

// Sigma lives in right-invariant exponential coordinates, blocks (dphi, dv, dp).
struct NavBelief {
  ExtendedPose pose;
  Mat9 cov = Mat9::Zero();
};

// Blocks (xi, b_tilde) with b_tilde = b - b_hat.
struct NavBeliefExt {
  ExtendedPose pose;
  BiasState bias;
  Mat15 cov = Mat15::Zero();
};

enum class NoiseForm { Exact, Simplified };

ExtendedPose gravity_increment(double dt, const Vec3& g = constants::kGravity);
ExtendedPose kinematic_increment(const ExtendedPose& x, double dt);
ExtendedPose imu_increment(const Vec3& gyro_hat, const Vec3& accel_hat, double dt);
// First-order increment with J ~ I and Q ~ I/2; only used to show the distortion
// of the classical discretization.
ExtendedPose imu_increment_classical(const Vec3& gyro_hat, const Vec3& accel_hat, double dt);

ExtendedPose propagate_pose(const ExtendedPose& x, const ImuSample& sample, const BiasState& bias,
                            double dt, const Vec3& g = constants::kGravity);

Mat9 error_transition(double dt, const Vec3& g = constants::kGravity);
Mat96 noise_injection(const ExtendedPose& x, double dt, NoiseForm form = NoiseForm::Exact,
                      const Vec3& g = constants::kGravity);
// diag(Q_w/dt, Q_a/dt)
Mat6 discrete_noise(const ImuNoiseSpec& noise, double dt);

NavBelief propagate_covariance(const NavBelief& belief, const ImuNoiseSpec& noise, double dt,
                               NoiseForm form = NoiseForm::Exact,
                               const Vec3& g = constants::kGravity);
// Pose and covariance in one step; L is evaluated at the pre-step estimate.
NavBelief propagate(const NavBelief& belief, const ImuSample& sample, const ImuNoiseSpec& noise,
                    double dt, NoiseForm form = NoiseForm::Exact,
                    const Vec3& g = constants::kGravity);

Mat96 increment_noise_jacobian(const Vec3& gyro_m, double dt, const ExtendedPose& mhat);

NavBeliefExt propagate_ext(const NavBeliefExt& belief, const ImuSample& sample,
                           const ImuNoiseSpec& noise, double dt,
                           NoiseForm form = NoiseForm::Exact,
                           const Vec3& g = constants::kGravity);

// Throws NonPSD when the smallest eigenvalue is below -1e-8; returns the symmetrized matrix.
MatX checked_symmetric(const MatX& m, const char* where);

// Keeps long integrations on SO(3); counts steps in `counter`.
void maintain_rotation(ExtendedPose& x, long& counter);

}  // namespace ains
