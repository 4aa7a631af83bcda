#include "ains/strapdown.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace ains {

ExtendedPose gravity_increment(double dt, const Vec3& g) {
  return {Rotation(), g * dt, 0.5 * g * dt * dt};
}

ExtendedPose kinematic_increment(const ExtendedPose& x, double dt) {
  return {x.rot, x.vel, x.pos + x.vel * dt};
}

ExtendedPose imu_increment(const Vec3& gyro_hat, const Vec3& accel_hat, double dt) {
  const Vec3 w = gyro_hat * dt;
  return {so3::exp(w), so3::left_jacobian(w) * accel_hat * dt,
          so3::q_matrix(w) * accel_hat * (dt * dt)};
}

ExtendedPose imu_increment_classical(const Vec3& gyro_hat, const Vec3& accel_hat, double dt) {
  return {so3::exp(gyro_hat * dt), accel_hat * dt, 0.5 * accel_hat * dt * dt};
}

ExtendedPose propagate_pose(const ExtendedPose& x, const ImuSample& sample, const BiasState& bias,
                            double dt, const Vec3& g) {
  const ExtendedPose m = imu_increment(sample.gyro - bias.gyro, sample.accel - bias.accel, dt);
  return gravity_increment(dt, g) * kinematic_increment(x, dt) * m;
}

Mat9 error_transition(double dt, const Vec3& g) {
  const Mat3 gx = so3::hat(g);
  Mat9 a = Mat9::Identity();
  a.block<3, 3>(3, 0) = gx * dt;
  a.block<3, 3>(6, 0) = 0.5 * gx * (dt * dt);
  a.block<3, 3>(6, 3) = Mat3::Identity() * dt;
  return a;
}

Mat96 noise_injection(const ExtendedPose& x, double dt, NoiseForm form, const Vec3& g) {
  const Mat3& r = x.rot.matrix();
  const Mat3 vr = so3::hat(x.vel) * r;
  const Mat3 pr = so3::hat(x.pos) * r;
  Mat96 l = Mat96::Zero();
  l.block<3, 3>(0, 0) = dt * r;
  l.block<3, 3>(3, 3) = dt * r;
  if (form == NoiseForm::Simplified) {
    l.block<3, 3>(3, 0) = dt * vr;
    l.block<3, 3>(6, 0) = dt * pr;
    return l;
  }
  const double dt2 = dt * dt;
  const Mat3 gr = so3::hat(g) * r;
  l.block<3, 3>(3, 0) = 0.5 * dt2 * gr + dt * vr;
  l.block<3, 3>(6, 0) = dt2 * dt / 6.0 * gr + 0.5 * dt2 * vr + dt * pr;
  l.block<3, 3>(6, 3) = 0.5 * dt2 * r;
  return l;
}

Mat6 discrete_noise(const ImuNoiseSpec& noise, double dt) {
  Vec6 d;
  d << noise.gyro_psd / dt, noise.accel_psd / dt;
  return d.asDiagonal();
}

MatX checked_symmetric(const MatX& m, const char* where) {
  MatX s = 0.5 * (m + m.transpose());
  const MatX shifted = s + 1e-8 * MatX::Identity(s.rows(), s.cols());
  if (Eigen::LLT<MatX>(shifted).info() == Eigen::Success) return s;
  const double lo = Eigen::SelfAdjointEigenSolver<MatX>(s, Eigen::EigenvaluesOnly).eigenvalues()(0);
  if (lo < -1e-8) throw NumericalError(ErrorCode::NonPSD, where);
  return s;
}

NavBelief propagate_covariance(const NavBelief& belief, const ImuNoiseSpec& noise, double dt,
                               NoiseForm form, const Vec3& g) {
  const Mat9 a = error_transition(dt, g);
  const Mat96 l = noise_injection(belief.pose, dt, form, g);
  const Mat9 next = a * belief.cov * a.transpose() + l * discrete_noise(noise, dt) * l.transpose();
  return {belief.pose, checked_symmetric(next, "propagate_covariance")};
}

NavBelief propagate(const NavBelief& belief, const ImuSample& sample, const ImuNoiseSpec& noise,
                    double dt, NoiseForm form, const Vec3& g) {
  NavBelief out = propagate_covariance(belief, noise, dt, form, g);
  out.pose = propagate_pose(belief.pose, sample, BiasState{}, dt, g);
  return out;
}

Mat96 increment_noise_jacobian(const Vec3& gyro_m, double dt, const ExtendedPose& mhat) {
  const Vec3 w = gyro_m * dt;
  Mat96 blocks = Mat96::Zero();
  blocks.block<3, 3>(0, 0) = dt * Mat3::Identity();
  blocks.block<3, 3>(3, 3) = dt * Mat3::Identity();
  blocks.block<3, 3>(6, 3) = so3::left_jacobian_inv(w) * so3::q_matrix(w) * (dt * dt);
  return se23::left_jacobian(se23::log(mhat)) * blocks;
}

NavBeliefExt propagate_ext(const NavBeliefExt& belief, const ImuSample& sample,
                           const ImuNoiseSpec& noise, double dt, NoiseForm form, const Vec3& g) {
  const Mat96 l = noise_injection(belief.pose, dt, form, g);
  Mat15 a = Mat15::Identity();
  a.topLeftCorner<9, 9>() = error_transition(dt, g);
  a.block<9, 6>(0, 9) = l;

  Eigen::Matrix<double, 15, 12> lx = Eigen::Matrix<double, 15, 12>::Zero();
  lx.block<9, 6>(0, 0) = l;
  lx.block<6, 6>(9, 6) = -dt * Mat6::Identity();

  Eigen::Matrix<double, 12, 1> q;
  q << noise.gyro_psd / dt, noise.accel_psd / dt, noise.gyro_bias_psd / dt,
      noise.accel_bias_psd / dt;

  NavBeliefExt out = belief;
  const Mat15 next = a * belief.cov * a.transpose() + lx * q.asDiagonal() * lx.transpose();
  out.cov = checked_symmetric(next, "propagate_ext");
  out.pose = propagate_pose(belief.pose, sample, belief.bias, dt, g);
  return out;
}

void maintain_rotation(ExtendedPose& x, long& counter) {
  ++counter;
  const Mat3& r = x.rot.matrix();
  if (counter % 10000 == 0 || (r.transpose() * r - Mat3::Identity()).norm() > 1e-8) {
    x.rot = rotation_project(r);
  }
}

}  // namespace ains
