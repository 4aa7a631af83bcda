#include "ains/liegroups.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>

namespace ains {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AngleNearPi: return "AngleNearPi";
    case ErrorCode::SingularInput: return "SingularInput";
    case ErrorCode::NonPSD: return "NonPSD";
    case ErrorCode::DegenerateMeasurement: return "DegenerateMeasurement";
    case ErrorCode::SingularInnovationCov: return "SingularInnovationCov";
    case ErrorCode::LostPositivity: return "LostPositivity";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

NumericalError::NumericalError(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

// ---------------------------------------------------------------- Rotation

Rotation::Rotation(const Mat3& m) : m_(m) { assert(validate(1e-6)); }

Rotation Rotation::operator*(const Rotation& other) const { return Rotation(m_ * other.m_); }

Rotation Rotation::inverse() const { return Rotation(m_.transpose()); }

bool Rotation::validate(double tol) const {
  if (!m_.allFinite()) return false;
  return (m_.transpose() * m_ - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(m_.determinant() - 1.0) <= tol;
}

// ------------------------------------------------------------ ExtendedPose

ExtendedPose ExtendedPose::from_matrix(const Mat5& m) {
  ExtendedPose x;
  x.rot = Rotation(m.topLeftCorner<3, 3>());
  x.vel = m.block<3, 1>(0, 3);
  x.pos = m.block<3, 1>(0, 4);
  return x;
}

Mat5 ExtendedPose::matrix() const {
  Mat5 m = Mat5::Identity();
  m.topLeftCorner<3, 3>() = rot.matrix();
  m.block<3, 1>(0, 3) = vel;
  m.block<3, 1>(0, 4) = pos;
  return m;
}

ExtendedPose ExtendedPose::operator*(const ExtendedPose& o) const {
  const Mat3& r = rot.matrix();
  return {rot * o.rot, vel + r * o.vel, pos + r * o.pos};
}

ExtendedPose ExtendedPose::inverse() const {
  const Mat3 rt = rot.matrix().transpose();
  return {Rotation(rt), -rt * vel, -rt * pos};
}

bool ExtendedPose::validate(double tol) const {
  return rot.validate(tol) && vel.allFinite() && pos.allFinite();
}

SE23Tangent SE23Tangent::from_vec(const Vec9& xi) {
  return {xi.segment<3>(0), xi.segment<3>(3), xi.segment<3>(6)};
}

Vec9 SE23Tangent::vec() const {
  Vec9 xi;
  xi << phi, nu, rho;
  return xi;
}

Mat5 SE23Tangent::hat() const { return se23::hat(vec()); }

// --------------------------------------------------------------- constants

namespace constants {

Mat5 D() {
  Mat5 d = Mat5::Zero();
  d(3, 4) = 1.0;
  return d;
}

Mat2 S() {
  Mat2 s = Mat2::Zero();
  s(0, 1) = 1.0;
  return s;
}

Mat9 Dbar() {
  Mat9 d = Mat9::Zero();
  d.block<3, 3>(6, 3) = Mat3::Identity();
  return d;
}

MatX proj(int n, int m) {
  MatX p = MatX::Zero(m, n);
  p.leftCols(m).setIdentity();
  return p;
}

Vec2 B() { return Vec2(1.0, 0.0); }
Vec2 C() { return Vec2(0.0, 1.0); }

}  // namespace constants

// -------------------------------------------------------------------- SO(3)

namespace so3 {

Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
      -w.y(), w.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) {
  if ((m + m.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw NumericalError(ErrorCode::InvalidArgument, "so3::vee of a non-skew matrix");
  }
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

Coeffs coeffs(double t) {
  Coeffs k{};
  k.theta = t;
  const double t2 = t * t;
  if (t < kSmallAngle) {
    const double t4 = t2 * t2;
    const double t6 = t4 * t2;
    k.a = 1.0 - t2 / 6.0 + t4 / 120.0 - t6 / 5040.0;
    k.b = 0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40320.0;
    k.c = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0 - t6 / 362880.0;
    k.d = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0 - t6 / 3628800.0;
    return k;
  }
  const double s = std::sin(t);
  const double c = std::cos(t);
  const double h = std::sin(0.5 * t);
  k.a = s / t;
  k.b = 2.0 * h * h / t2;
  k.c = (t - s) / (t2 * t);
  k.d = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
  return k;
}

namespace {

// 1/t^2 - (1 + cos t)/(2 t sin t)
double inv_coeff(double t) {
  const double t2 = t * t;
  if (t < kSmallAngle) {
    const double t4 = t2 * t2;
    return 1.0 / 12.0 + t2 / 720.0 + t4 / 30240.0 + t4 * t2 / 1209600.0;
  }
  return 1.0 / t2 - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
}

void check_pi(double t, const char* where) {
  if (t >= std::numbers::pi - kPiMargin) {
    throw NumericalError(ErrorCode::AngleNearPi, where);
  }
}

}  // namespace

Rotation exp(const Vec3& w) {
  const Coeffs k = coeffs(w.norm());
  const Mat3 W = hat(w);
  return Rotation(Mat3::Identity() + k.a * W + k.b * W * W);
}

Vec3 log(const Rotation& r) {
  const Mat3& m = r.matrix();
  const Vec3 s2(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  const double t = std::atan2(0.5 * s2.norm(), 0.5 * (m.trace() - 1.0));
  check_pi(t, "so3::log");
  return s2 / (2.0 * coeffs(t).a);
}

Mat3 left_jacobian(const Vec3& w) {
  const Coeffs k = coeffs(w.norm());
  const Mat3 W = hat(w);
  return Mat3::Identity() + k.b * W + k.c * W * W;
}

Mat3 left_jacobian_inv(const Vec3& w) {
  const double t = w.norm();
  check_pi(t, "so3::left_jacobian_inv");
  const Mat3 W = hat(w);
  return Mat3::Identity() - 0.5 * W + inv_coeff(t) * W * W;
}

Mat3 q_matrix(const Vec3& w) {
  const Coeffs k = coeffs(w.norm());
  const Mat3 W = hat(w);
  return 0.5 * Mat3::Identity() + k.c * W + k.d * W * W;
}

}  // namespace so3

// ------------------------------------------------------------------ SE_2(3)

namespace se23 {

Mat5 hat(const Vec9& xi) {
  Mat5 m = Mat5::Zero();
  m.topLeftCorner<3, 3>() = so3::hat(xi.segment<3>(0));
  m.block<3, 1>(0, 3) = xi.segment<3>(3);
  m.block<3, 1>(0, 4) = xi.segment<3>(6);
  return m;
}

Vec9 vee(const Mat5& m) {
  if (m.bottomRows<2>().cwiseAbs().maxCoeff() > 1e-9) {
    throw NumericalError(ErrorCode::InvalidArgument, "se23::vee of a matrix outside the algebra");
  }
  Vec9 xi;
  xi << so3::vee(m.topLeftCorner<3, 3>()), m.block<3, 1>(0, 3), m.block<3, 1>(0, 4);
  return xi;
}

ExtendedPose exp(const Vec9& xi) {
  const Vec3 phi = xi.segment<3>(0);
  const Mat3 j = so3::left_jacobian(phi);
  return {so3::exp(phi), j * xi.segment<3>(3), j * xi.segment<3>(6)};
}

Vec9 log(const ExtendedPose& x) {
  const Vec3 phi = so3::log(x.rot);
  const Mat3 ji = so3::left_jacobian_inv(phi);
  Vec9 xi;
  xi << phi, ji * x.vel, ji * x.pos;
  return xi;
}

Mat9 adjoint(const ExtendedPose& x) {
  const Mat3& r = x.rot.matrix();
  Mat9 ad = Mat9::Zero();
  ad.block<3, 3>(0, 0) = r;
  ad.block<3, 3>(3, 3) = r;
  ad.block<3, 3>(6, 6) = r;
  ad.block<3, 3>(3, 0) = so3::hat(x.vel) * r;
  ad.block<3, 3>(6, 0) = so3::hat(x.pos) * r;
  return ad;
}

Mat9 small_adjoint(const Vec9& xi) {
  const Mat3 w = so3::hat(xi.segment<3>(0));
  Mat9 ad = Mat9::Zero();
  ad.block<3, 3>(0, 0) = w;
  ad.block<3, 3>(3, 3) = w;
  ad.block<3, 3>(6, 6) = w;
  ad.block<3, 3>(3, 0) = so3::hat(xi.segment<3>(3));
  ad.block<3, 3>(6, 0) = so3::hat(xi.segment<3>(6));
  return ad;
}

Mat3 coupling_block(const Vec3& omega, const Vec3& nu) {
  const double t = omega.norm();
  const so3::Coeffs k = so3::coeffs(t);
  double f;  // (2t - 3 sin t + t cos t)/(2 t^5)
  if (t < kSmallAngle) {
    const double t2 = t * t;
    const double t4 = t2 * t2;
    f = 1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0 - t4 * t2 / 9979200.0;
  } else {
    const double t2 = t * t;
    f = (2.0 * t - 3.0 * std::sin(t) + t * std::cos(t)) / (2.0 * t2 * t2 * t);
  }
  const Mat3 W = so3::hat(omega);
  const Mat3 N = so3::hat(nu);
  const Mat3 WN = W * N;
  const Mat3 NW = N * W;
  const Mat3 WNW = WN * W;
  const Mat3 WW = W * W;
  return 0.5 * N + k.c * (WN + NW + WNW) + k.d * (WW * N + NW * W - 3.0 * WNW) +
         f * (WNW * W + W * WNW);
}

Mat9 left_jacobian(const Vec9& xi) {
  const Vec3 phi = xi.segment<3>(0);
  const Mat3 j = so3::left_jacobian(phi);
  Mat9 out = Mat9::Zero();
  out.block<3, 3>(0, 0) = j;
  out.block<3, 3>(3, 3) = j;
  out.block<3, 3>(6, 6) = j;
  out.block<3, 3>(3, 0) = coupling_block(phi, xi.segment<3>(3));
  out.block<3, 3>(6, 0) = coupling_block(phi, xi.segment<3>(6));
  return out;
}

Mat9 left_jacobian_inv(const Vec9& xi) {
  const Vec3 phi = xi.segment<3>(0);
  const Mat3 ji = so3::left_jacobian_inv(phi);
  Mat9 out = Mat9::Zero();
  out.block<3, 3>(0, 0) = ji;
  out.block<3, 3>(3, 3) = ji;
  out.block<3, 3>(6, 6) = ji;
  out.block<3, 3>(3, 0) = -ji * coupling_block(phi, xi.segment<3>(3)) * ji;
  out.block<3, 3>(6, 0) = -ji * coupling_block(phi, xi.segment<3>(6)) * ji;
  return out;
}

Mat5 homogeneous_exp_jacobian(const Vec9& xi) {
  const Vec3 phi = xi.segment<3>(0);
  const Mat3 q = so3::q_matrix(phi);
  Mat5 out = Mat5::Identity();
  out.topLeftCorner<3, 3>() = so3::left_jacobian(phi);
  out.block<3, 1>(0, 3) = q * xi.segment<3>(3);
  out.block<3, 1>(0, 4) = q * xi.segment<3>(6);
  return out;
}

}  // namespace se23

// ---------------------------------------------------------- generic series

namespace {

double norm1(const MatX& a) { return a.cwiseAbs().colwise().sum().maxCoeff(); }

// Returns (J(a), exp(a)) for a with small norm.
std::pair<MatX, MatX> series_j_exp(const MatX& a) {
  const Eigen::Index n = a.rows();
  MatX j = MatX::Identity(n, n);
  MatX e = MatX::Identity(n, n);
  MatX power = MatX::Identity(n, n);
  double fact = 1.0;  // n!
  for (int k = 1; k < 40; ++k) {
    power = power * a;
    fact *= k;
    const MatX term_e = power / fact;
    const MatX term_j = term_e / (k + 1);
    e += term_e;
    j += term_j;
    if (norm1(term_e) <= std::numeric_limits<double>::epsilon() * norm1(e)) break;
  }
  return {j, e};
}

}  // namespace

MatX matrix_J(const MatX& a) {
  int halvings = 0;
  double nrm = a.size() ? norm1(a) : 0.0;
  while (nrm >= 0.5) {
    nrm *= 0.5;
    ++halvings;
  }
  auto [j, e] = series_j_exp(std::ldexp(1.0, -halvings) * a);
  const MatX id = MatX::Identity(a.rows(), a.cols());
  for (int i = 0; i < halvings; ++i) {
    j = 0.5 * j * (id + e);
    e = e * e;
  }
  return j;
}

MatX matrix_exp(const MatX& a) {
  return MatX::Identity(a.rows(), a.cols()) + a * matrix_J(a);
}

Rotation rotation_project(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues().minCoeff() < 1e-12) {
    throw NumericalError(ErrorCode::SingularInput, "rotation_project of a rank-deficient matrix");
  }
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return Rotation(u * fix * v.transpose());
}

}  // namespace ains
