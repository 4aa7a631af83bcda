#include "ains/preintegration.hpp"

namespace ains {

namespace {

Mat15x12 ext_noise_map(const Mat96& lk, double dt) {
  Mat15x12 l = Mat15x12::Zero();
  l.block<9, 6>(0, 0) = lk;
  l.block<6, 6>(9, 6) = -dt * Mat6::Identity();
  return l;
}

Mat15 ext_transition(const Mat9& a, const Mat96& j) {
  Mat15 out = Mat15::Identity();
  out.topLeftCorner<9, 9>() = a;
  out.block<9, 6>(0, 9) = j;
  return out;
}

}  // namespace

PreintegratedDelta delta_push(const PreintegratedDelta& acc, const ExtendedPose& mk,
                              const Mat9& ak, const Mat96& lk, const Mat6& qk, double dt) {
  PreintegratedDelta out = acc;
  out.delta = kinematic_increment(acc.delta, dt) * mk;
  out.duration = acc.duration + dt;
  out.count = acc.count + 1;
  const Mat9 next = ak * acc.cov * ak.transpose() + lk * qk * lk.transpose();
  out.cov = 0.5 * (next + next.transpose());
  out.bias_jacobian = ak * acc.bias_jacobian + lk;
  return out;
}

PreintegratedDelta delta_push_ext(const PreintegratedDelta& acc, const ExtendedPose& mk,
                                  const Mat9& ak, const Mat96& lk, const Mat12& qk_ext,
                                  double dt) {
  PreintegratedDelta out = delta_push(acc, mk, ak, lk, qk_ext.topLeftCorner<6, 6>(), dt);
  const Mat15 a = ext_transition(ak, lk);
  const Mat15x12 l = ext_noise_map(lk, dt);
  const Mat15 prev = acc.cov_ext.value_or(Mat15::Zero());
  const Mat15 next = a * prev * a.transpose() + l * qk_ext * l.transpose();
  out.cov_ext = 0.5 * (next + next.transpose());
  return out;
}

ExtendedPose delta_apply(const ExtendedPose& xi, const PreintegratedDelta& acc, const Vec3& g) {
  return gravity_increment(acc.duration, g) * kinematic_increment(xi, acc.duration) * acc.delta;
}

Mat9 batch_covariance(const Mat9& sigma_i, const PreintegratedDelta& acc, const Vec3& g) {
  const Mat9 a = error_transition(acc.duration, g);
  return a * sigma_i * a.transpose() + acc.cov;
}

PreintegratedDelta merge(const PreintegratedDelta& left, const PreintegratedDelta& right,
                         const Vec3& g) {
  const Mat9 a = error_transition(right.duration, g);
  PreintegratedDelta out;
  out.delta = kinematic_increment(left.delta, right.duration) * right.delta;
  out.duration = left.duration + right.duration;
  out.count = left.count + right.count;
  out.cov = a * left.cov * a.transpose() + right.cov;
  const ExtendedPose shifted = kinematic_increment(left.delta, right.duration);
  out.bias_jacobian = error_transition(right.duration, Vec3::Zero()) * left.bias_jacobian +
                      se23::adjoint(shifted) * right.bias_jacobian;
  if (left.cov_ext && right.cov_ext) {
    const Mat15 ar = ext_transition(a, right.bias_jacobian);
    out.cov_ext = ar * *left.cov_ext * ar.transpose() + *right.cov_ext;
  }
  return out;
}

PreintegratedDelta preintegrate(const std::vector<ImuSample>& samples, const BiasState& bias,
                                const ImuNoiseSpec& noise, double dt, bool with_bias,
                                NoiseForm form, const Vec3& g) {
  const Mat9 a = error_transition(dt, g);
  const Mat9 a0 = error_transition(dt, Vec3::Zero());
  const Mat6 q = discrete_noise(noise, dt);
  Mat12 q_ext = Mat12::Zero();
  q_ext.topLeftCorner<6, 6>() = q;
  q_ext.block<3, 3>(6, 6) = (noise.gyro_bias_psd / dt).asDiagonal();
  q_ext.block<3, 3>(9, 9) = (noise.accel_bias_psd / dt).asDiagonal();

  PreintegratedDelta acc;
  if (with_bias) acc.cov_ext = Mat15::Zero();
  for (const ImuSample& s : samples) {
    const ExtendedPose mk = imu_increment(s.gyro - bias.gyro, s.accel - bias.accel, dt);
    const Mat96 lk = noise_injection(acc.delta, dt, form, g);
    const Mat96 jk = a0 * acc.bias_jacobian + noise_injection(acc.delta, dt, form, Vec3::Zero());
    acc = with_bias ? delta_push_ext(acc, mk, a, lk, q_ext, dt) : delta_push(acc, mk, a, lk, q, dt);
    acc.bias_jacobian = jk;
  }
  return acc;
}

}  // namespace ains
