#include "ains/inekf.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <boost/math/distributions/chi_squared.hpp>

#include <array>

namespace ains {

namespace {

constexpr std::array<const char*, kSensorKindCount> kKindNames = {
    "GpsPosition", "GpsVelocity",  "Magnetometer", "Landmark",
    "Dvl",         "Barometer",    "RangeToAnchor", "PitotTube",
    "OpticalFlow", "BearingToFeature", "TiltAngle", "ZeroLateralVelocity"};

const Vec3 kE1 = Vec3::UnitX();
const Vec3 kE2 = Vec3::UnitY();
const Vec3 kE3 = Vec3::UnitZ();

Mat3 projector(const Vec3& unit) { return Mat3::Identity() - unit * unit.transpose(); }

Vec3 unit_value(const AidingMeasurement& m) {
  const Vec3 u = m.value.head<3>();
  if (std::abs(u.norm() - 1.0) > 1e-6) {
    throw NumericalError(ErrorCode::InvalidArgument,
                         std::string(to_string(m.kind)) + " value is not a unit vector");
  }
  return u;
}

void require_norm(double n, const char* what) {
  if (n < 1e-6) throw NumericalError(ErrorCode::DegenerateMeasurement, what);
}

MatX row_block(int rows) { return MatX::Zero(rows, 9); }

}  // namespace

const char* to_string(SensorKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<SensorKind> sensor_kind_from_string(std::string_view name) {
  for (int i = 0; i < kSensorKindCount; ++i) {
    if (name == kKindNames[i]) return static_cast<SensorKind>(i);
  }
  return std::nullopt;
}

int measurement_dim(SensorKind kind) {
  switch (kind) {
    case SensorKind::Barometer:
    case SensorKind::RangeToAnchor:
    case SensorKind::PitotTube:
    case SensorKind::TiltAngle:
    case SensorKind::ZeroLateralVelocity:
      return 1;
    default:
      return 3;
  }
}

bool is_unit_vector_kind(SensorKind kind) {
  return kind == SensorKind::OpticalFlow || kind == SensorKind::BearingToFeature;
}

bool is_pseudo_kind(SensorKind kind) { return kind == SensorKind::ZeroLateralVelocity; }

Invariance invariance_of(SensorKind kind) {
  switch (kind) {
    case SensorKind::GpsPosition:
    case SensorKind::GpsVelocity:
      return Invariance::Left;
    case SensorKind::Magnetometer:
    case SensorKind::Landmark:
    case SensorKind::Dvl:
      return Invariance::Right;
    default:
      return Invariance::Generic;
  }
}

VecX measurement_model(const AidingMeasurement& m, const ExtendedPose& x) {
  const Mat3& r = x.rot.matrix();
  const Mat3 rt = r.transpose();
  VecX y(measurement_dim(m.kind));
  switch (m.kind) {
    case SensorKind::GpsPosition:
      y = x.pos + r * m.param;
      break;
    case SensorKind::GpsVelocity:
      y = x.vel + r * m.omega.cross(m.param);
      break;
    case SensorKind::Magnetometer:
      y = rt * m.param;
      break;
    case SensorKind::Landmark:
      y = rt * (m.param - x.pos);
      break;
    case SensorKind::Dvl:
      y = rt * x.vel;
      break;
    case SensorKind::Barometer:
      y(0) = kE3.dot(x.pos);
      break;
    case SensorKind::RangeToAnchor:
      y(0) = (m.param - x.pos).norm();
      break;
    case SensorKind::PitotTube:
      y(0) = kE1.dot(rt * (x.vel - m.param));
      break;
    case SensorKind::OpticalFlow:
      y = (rt * x.vel).normalized();
      break;
    case SensorKind::BearingToFeature:
      y = (rt * (m.param - x.pos)).normalized();
      break;
    case SensorKind::TiltAngle:
      y(0) = kE3.dot(rt * kE3);
      break;
    case SensorKind::ZeroLateralVelocity:
      y(0) = kE2.dot(rt * x.vel);
      break;
  }
  return y;
}

LinearizedUpdate linearize(const AidingMeasurement& m, const ExtendedPose& xhat) {
  const Mat3& rh = xhat.rot.matrix();
  const Mat3 rht = rh.transpose();
  const Vec3& vh = xhat.vel;
  const Vec3& ph = xhat.pos;
  const int dim = measurement_dim(m.kind);
  LinearizedUpdate u;
  u.tag = invariance_of(m.kind);
  u.H = row_block(dim);
  u.z = VecX::Zero(dim);
  u.V = m.noise_cov;

  switch (m.kind) {
    case SensorKind::GpsPosition: {
      const Vec3 y = m.value.head<3>();
      u.H.block<3, 3>(0, 0) = -so3::hat(y);
      u.H.block<3, 3>(0, 6) = Mat3::Identity();
      u.z = ph + rh * m.param - y;
      break;
    }
    case SensorKind::GpsVelocity: {
      const Vec3 y = m.value.head<3>();
      u.H.block<3, 3>(0, 0) = -so3::hat(y);
      u.H.block<3, 3>(0, 3) = Mat3::Identity();
      u.z = vh + rh * m.omega.cross(m.param) - y;
      break;
    }
    case SensorKind::Magnetometer:
      u.H.block<3, 3>(0, 0) = -so3::hat(m.param);
      u.z = rh * m.value.head<3>() - m.param;
      u.V = rh * m.noise_cov * rht;
      break;
    case SensorKind::Landmark:
      u.H.block<3, 3>(0, 0) = -so3::hat(m.param);
      u.H.block<3, 3>(0, 6) = Mat3::Identity();
      u.z = rh * m.value.head<3>() + ph - m.param;
      u.V = rh * m.noise_cov * rht;
      break;
    case SensorKind::Dvl:
      u.H.block<3, 3>(0, 3) = -Mat3::Identity();
      u.z = rh * m.value.head<3>() - vh;
      u.V = rh * m.noise_cov * rht;
      break;
    case SensorKind::Barometer:
      u.H.block<1, 3>(0, 0) = kE3.transpose() * so3::hat(ph);
      u.H.block<1, 3>(0, 6) = -kE3.transpose();
      u.z(0) = m.value(0) - kE3.dot(ph);
      break;
    case SensorKind::RangeToAnchor: {
      const Vec3 d = m.param - ph;
      require_norm(d.norm(), "RangeToAnchor: estimate coincides with the anchor");
      u.H.block<1, 3>(0, 0) = -d.transpose() * so3::hat(ph);
      u.H.block<1, 3>(0, 6) = d.transpose();
      u.z(0) = 0.5 * m.value(0) * m.value(0) - 0.5 * d.squaredNorm();
      u.V = d.squaredNorm() * m.noise_cov;
      break;
    }
    case SensorKind::PitotTube:
      u.H.block<1, 3>(0, 0) = kE1.transpose() * rht * so3::hat(m.param);
      u.H.block<1, 3>(0, 3) = -kE1.transpose() * rht;
      u.z(0) = m.value(0) - kE1.dot(rht * (vh - m.param));
      break;
    case SensorKind::OpticalFlow: {
      const Vec3 f = unit_value(m);
      const Vec3 body_vel = rht * vh;
      require_norm(body_vel.norm(), "OpticalFlow: estimated velocity is zero");
      const Mat3 pf = projector(f);
      u.H.block<3, 3>(0, 3) = -pf * rht;
      u.z = -pf * body_vel;
      u.V = body_vel.squaredNorm() * m.noise_cov;
      break;
    }
    case SensorKind::BearingToFeature: {
      const Vec3 b = unit_value(m);
      const Vec3 d = m.param - ph;
      require_norm(d.norm(), "BearingToFeature: estimate coincides with the feature");
      const Mat3 pb = projector(b);
      u.H.block<3, 3>(0, 0) = -pb * rht * so3::hat(m.param);
      u.H.block<3, 3>(0, 6) = pb * rht;
      u.z = -pb * rht * d;
      u.V = d.squaredNorm() * m.noise_cov;
      break;
    }
    case SensorKind::TiltAngle:
      u.H.block<1, 3>(0, 0) = -kE3.transpose() * rht * so3::hat(kE3);
      u.z(0) = m.value(0) - kE3.dot(rht * kE3);
      break;
    case SensorKind::ZeroLateralVelocity:
      u.H.block<1, 3>(0, 3) = -kE2.transpose() * rht;
      u.z(0) = m.value(0) - kE2.dot(rht * vh);
      break;
  }
  return u;
}

KalmanStep kalman_update(const MatX& cov, const MatX& H, const VecX& z, const MatX& V,
                         CovarianceUpdate form) {
  const MatX s = H * cov * H.transpose() + V;
  const MatX s_sym = 0.5 * (s + s.transpose());
  const VecX ev = Eigen::SelfAdjointEigenSolver<MatX>(s_sym, Eigen::EigenvaluesOnly).eigenvalues();
  if (!(ev(0) > 0.0) || ev(ev.size() - 1) / ev(0) > 1e12) {
    throw NumericalError(ErrorCode::SingularInnovationCov, "innovation covariance is singular");
  }
  const MatX k = s_sym.ldlt().solve(H * cov).transpose();
  const Eigen::Index n = cov.rows();
  const MatX ikh = MatX::Identity(n, n) - k * H;
  MatX post = form == CovarianceUpdate::Joseph
                  ? MatX(ikh * cov * ikh.transpose() + k * V * k.transpose())
                  : MatX(ikh * cov);
  return {k * z, checked_symmetric(post, "kalman_update")};
}

NavBelief correct(const NavBelief& belief, const LinearizedUpdate& upd, CovarianceUpdate form) {
  const KalmanStep st = kalman_update(belief.cov, upd.H, upd.z, upd.V, form);
  return {se23::exp(-Vec9(st.delta)) * belief.pose, st.cov};
}

NavBeliefExt correct_ext(const NavBeliefExt& belief, const LinearizedUpdate& upd,
                         CovarianceUpdate form) {
  MatX h = MatX::Zero(upd.H.rows(), 15);
  h.leftCols(upd.H.cols()) = upd.H;
  const KalmanStep st = kalman_update(belief.cov, h, upd.z, upd.V, form);
  NavBeliefExt out;
  out.pose = se23::exp(-Vec9(st.delta.head<9>())) * belief.pose;
  out.bias.gyro = belief.bias.gyro + st.delta.segment<3>(9);
  out.bias.accel = belief.bias.accel + st.delta.segment<3>(12);
  out.cov = st.cov;
  return out;
}

bool passes_gate(const LinearizedUpdate& upd, const MatX& cov, double probability) {
  MatX h = MatX::Zero(upd.H.rows(), cov.cols());
  h.leftCols(upd.H.cols()) = upd.H;
  const MatX s = h * cov * h.transpose() + upd.V;
  const double d2 = upd.z.dot(s.ldlt().solve(upd.z));
  const boost::math::chi_squared dist(static_cast<double>(upd.z.size()));
  return d2 <= boost::math::quantile(dist, probability);
}

// ---------------------------------------------------------------- MEKF

Mat9 invariant_to_euclidean(const ExtendedPose& xhat) {
  Mat9 t = Mat9::Zero();
  t.block<3, 3>(0, 0) = Mat3::Identity();
  t.block<3, 3>(3, 0) = so3::hat(xhat.vel);
  t.block<3, 3>(3, 3) = -Mat3::Identity();
  t.block<3, 3>(6, 0) = so3::hat(xhat.pos);
  t.block<3, 3>(6, 6) = -Mat3::Identity();
  return t;
}

MekfBelief mekf_step(const MekfBelief& belief, const ImuSample& sample, const ImuNoiseSpec& noise,
                     double dt, const Vec3& g) {
  const Mat3& rh = belief.pose.rot.matrix();
  Mat9 f = Mat9::Zero();
  f.block<3, 3>(3, 0) = so3::hat(rh * sample.accel);
  f.block<3, 3>(6, 3) = Mat3::Identity();
  Mat96 gm = Mat96::Zero();
  gm.block<3, 3>(0, 0) = rh;
  gm.block<3, 3>(3, 3) = -rh;
  Vec6 qc;
  qc << noise.gyro_psd, noise.accel_psd;

  const Mat9 phi = Mat9::Identity() + f * dt;
  const Mat9 next = phi * belief.cov * phi.transpose() + gm * qc.asDiagonal() * gm.transpose() * dt;
  return {propagate_pose(belief.pose, sample, BiasState{}, dt, g),
          checked_symmetric(next, "mekf_step")};
}

LinearizedUpdate mekf_linearize(const AidingMeasurement& m, const ExtendedPose& xhat) {
  const Mat3& rh = xhat.rot.matrix();
  const Mat3 rht = rh.transpose();
  const Vec3& vh = xhat.vel;
  const Vec3& ph = xhat.pos;
  const int dim = measurement_dim(m.kind);
  LinearizedUpdate u;
  u.tag = Invariance::Generic;
  u.H = row_block(dim);
  u.V = m.noise_cov;
  u.z = m.value - measurement_model(m, xhat);

  switch (m.kind) {
    case SensorKind::GpsPosition:
      u.H.block<3, 3>(0, 0) = so3::hat(rh * m.param);
      u.H.block<3, 3>(0, 6) = Mat3::Identity();
      break;
    case SensorKind::GpsVelocity:
      u.H.block<3, 3>(0, 0) = so3::hat(rh * m.omega.cross(m.param));
      u.H.block<3, 3>(0, 3) = Mat3::Identity();
      break;
    case SensorKind::Magnetometer:
      u.H.block<3, 3>(0, 0) = -rht * so3::hat(m.param);
      break;
    case SensorKind::Landmark:
      u.H.block<3, 3>(0, 0) = -rht * so3::hat(m.param - ph);
      u.H.block<3, 3>(0, 6) = -rht;
      break;
    case SensorKind::Dvl:
      u.H.block<3, 3>(0, 0) = -rht * so3::hat(vh);
      u.H.block<3, 3>(0, 3) = rht;
      break;
    case SensorKind::Barometer:
      u.H.block<1, 3>(0, 6) = kE3.transpose();
      break;
    case SensorKind::RangeToAnchor: {
      const Vec3 d = m.param - ph;
      require_norm(d.norm(), "RangeToAnchor: estimate coincides with the anchor");
      u.H.block<1, 3>(0, 6) = -d.normalized().transpose();
      break;
    }
    case SensorKind::PitotTube:
      u.H.block<1, 3>(0, 0) = -kE1.transpose() * rht * so3::hat(vh - m.param);
      u.H.block<1, 3>(0, 3) = kE1.transpose() * rht;
      break;
    case SensorKind::OpticalFlow: {
      const Vec3 f = unit_value(m);
      const Vec3 body_vel = rht * vh;
      require_norm(body_vel.norm(), "OpticalFlow: estimated velocity is zero");
      const Mat3 pf = projector(f);
      u.H.block<3, 3>(0, 0) = -pf * rht * so3::hat(vh);
      u.H.block<3, 3>(0, 3) = pf * rht;
      u.z = -pf * body_vel;
      u.V = body_vel.squaredNorm() * m.noise_cov;
      break;
    }
    case SensorKind::BearingToFeature: {
      const Vec3 b = unit_value(m);
      const Vec3 d = m.param - ph;
      require_norm(d.norm(), "BearingToFeature: estimate coincides with the feature");
      const Mat3 pb = projector(b);
      u.H.block<3, 3>(0, 0) = -pb * rht * so3::hat(d);
      u.H.block<3, 3>(0, 6) = -pb * rht;
      u.z = -pb * rht * d;
      u.V = d.squaredNorm() * m.noise_cov;
      break;
    }
    case SensorKind::TiltAngle:
      u.H.block<1, 3>(0, 0) = -kE3.transpose() * rht * so3::hat(kE3);
      break;
    case SensorKind::ZeroLateralVelocity:
      u.H.block<1, 3>(0, 0) = -kE2.transpose() * rht * so3::hat(vh);
      u.H.block<1, 3>(0, 3) = kE2.transpose() * rht;
      break;
  }
  return u;
}

MekfBelief mekf_correct(const MekfBelief& belief, const AidingMeasurement& meas,
                        CovarianceUpdate form) {
  const LinearizedUpdate u = mekf_linearize(meas, belief.pose);
  const KalmanStep st = kalman_update(belief.cov, u.H, u.z, u.V, form);
  MekfBelief out;
  out.pose.rot = so3::exp(-Vec3(st.delta.head<3>())) * belief.pose.rot;
  out.pose.vel = belief.pose.vel + st.delta.segment<3>(3);
  out.pose.pos = belief.pose.pos + st.delta.segment<3>(6);
  out.cov = st.cov;
  return out;
}

}  // namespace ains
