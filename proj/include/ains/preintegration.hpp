#pragma once

#include "ains/strapdown.hpp"

#include <optional>
#include <vector>

namespace ains {

using Mat15x12 = Eigen::Matrix<double, 15, 12>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

struct PreintegratedDelta {
  ExtendedPose delta;                        // Delta M_ij
  double duration = 0.0;                     // Delta T
  int count = 0;                             // j - i
  Mat9 cov = Mat9::Zero();                   // accumulated noise term
  // Delta M(b + db) ~ exp(-J db) Delta M(b). Gravity-free recursion, since the
  // delta itself carries no gravity.
  Mat96 bias_jacobian = Mat96::Zero();
  std::optional<Mat15> cov_ext;              // bias-augmented accumulation
};

PreintegratedDelta delta_push(const PreintegratedDelta& acc, const ExtendedPose& mk,
                              const Mat9& ak, const Mat96& lk, const Mat6& qk, double dt);

// Bias-augmented variant: also advances cov_ext. Both push variants advance
// bias_jacobian with the given A_k, L_k.
PreintegratedDelta delta_push_ext(const PreintegratedDelta& acc, const ExtendedPose& mk,
                                  const Mat9& ak, const Mat96& lk, const Mat12& qk_ext,
                                  double dt);

ExtendedPose delta_apply(const ExtendedPose& xi, const PreintegratedDelta& acc,
                         const Vec3& g = constants::kGravity);

Mat9 batch_covariance(const Mat9& sigma_i, const PreintegratedDelta& acc,
                      const Vec3& g = constants::kGravity);

// Concatenation of two adjacent intervals. bias_jacobian composes exactly; cov
// uses A(T_right) cov_l A^T + cov_r.
PreintegratedDelta merge(const PreintegratedDelta& left, const PreintegratedDelta& right,
                         const Vec3& g = constants::kGravity);

// Accumulates a sample stream at a fixed step. L_k is evaluated at the
// keyframe-relative pose, i.e. the delta accumulated so far. g enters cov and
// cov_ext only.
PreintegratedDelta preintegrate(const std::vector<ImuSample>& samples, const BiasState& bias,
                                const ImuNoiseSpec& noise, double dt, bool with_bias = false,
                                NoiseForm form = NoiseForm::Exact,
                                const Vec3& g = constants::kGravity);

}  // namespace ains
