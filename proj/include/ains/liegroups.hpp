#pragma once

#include "ains/types.hpp"

namespace ains {

inline constexpr double kSmallAngle = 1e-4;
inline constexpr double kPiMargin = 1e-6;

class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}
  // Trusted constructor: checked by assertion in debug builds only.
  explicit Rotation(const Mat3& m);

  static Rotation identity() { return Rotation(); }

  const Mat3& matrix() const { return m_; }
  Rotation operator*(const Rotation& other) const;
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation inverse() const;
  bool validate(double tol = 1e-9) const;

 private:
  Mat3 m_;
};

// X = Gamma(R, v, p), kept in factored form.
struct ExtendedPose {
  Rotation rot;
  Vec3 vel = Vec3::Zero();
  Vec3 pos = Vec3::Zero();

  static ExtendedPose identity() { return {}; }
  static ExtendedPose from_matrix(const Mat5& m);

  Mat5 matrix() const;
  ExtendedPose operator*(const ExtendedPose& other) const;
  ExtendedPose inverse() const;
  bool validate(double tol = 1e-9) const;
};

// Named view of a 9-vector (phi, nu, rho).
struct SE23Tangent {
  Vec3 phi = Vec3::Zero();
  Vec3 nu = Vec3::Zero();
  Vec3 rho = Vec3::Zero();

  static SE23Tangent from_vec(const Vec9& xi);
  Vec9 vec() const;
  Mat5 hat() const;
};

namespace constants {

inline const Vec3 kGravity{0.0, 0.0, 9.81};

Mat5 D();
Mat2 S();
Mat9 Dbar();
// m x n selector [I_m 0].
MatX proj(int n, int m);
Vec2 B();
Vec2 C();

}  // namespace constants

namespace so3 {

Mat3 hat(const Vec3& w);
Vec3 vee(const Mat3& m);

Rotation exp(const Vec3& w);
Vec3 log(const Rotation& r);

Mat3 left_jacobian(const Vec3& w);
Mat3 left_jacobian_inv(const Vec3& w);
// Second-order left Jacobian Q_l.
Mat3 q_matrix(const Vec3& w);

// Scalar coefficients shared by the closed forms above. Exposed for the
// batched kernels, which must reproduce them bit for bit.
struct Coeffs {
  double theta;
  double a;  // sin(t)/t
  double b;  // (1 - cos t)/t^2
  double c;  // (t - sin t)/t^3
  double d;  // (t^2 + 2 cos t - 2)/(2 t^4)
};
Coeffs coeffs(double theta);

}  // namespace so3

namespace se23 {

Mat5 hat(const Vec9& xi);
Vec9 vee(const Mat5& m);

ExtendedPose exp(const Vec9& xi);
Vec9 log(const ExtendedPose& x);

Mat9 adjoint(const ExtendedPose& x);
Mat9 small_adjoint(const Vec9& xi);

// Cross-coupling block Q_{omega,nu} of the SE_2(3) left Jacobian.
Mat3 coupling_block(const Vec3& omega, const Vec3& nu);
Mat9 left_jacobian(const Vec9& xi);
Mat9 left_jacobian_inv(const Vec9& xi);

// Closed form of matrix_J(hat(xi)).
Mat5 homogeneous_exp_jacobian(const Vec9& xi);

}  // namespace se23

// J(A) = int_0^1 exp(sA) ds via scaled power series.
MatX matrix_J(const MatX& a);
// exp(A) = I + A J(A).
MatX matrix_exp(const MatX& a);

Rotation rotation_project(const Mat3& m);

}  // namespace ains
