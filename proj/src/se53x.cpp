#include "ains/se53x.hpp"

#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <array>

namespace ains {

const char* to_string(Se53Kind kind) {
  static constexpr std::array<const char*, 10> names = {
      "GpsPosition", "Landmark", "Bearing", "Tilt",        "Magnetometer",
      "Pitot",       "Dvl",      "GpsVelocity", "OpticalFlow", "ZeroSideSlip"};
  return names[static_cast<int>(kind)];
}

Mat5 se53_A(const Vec3& g) {
  Mat5 a = Mat5::Zero();
  a(0, 1) = 1.0;
  a.block<3, 1>(2, 0) = g;
  return a;
}

Mat15 se53_F(const Vec3& omega, const Vec3& g) {
  const Mat5 a = se53_A(g);
  const Mat3 w = so3::hat(omega);
  Mat15 f = Mat15::Zero();
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      f.block<3, 3>(3 * i, 3 * j) = a(j, i) * Mat3::Identity();
    }
    f.block<3, 3>(3 * i, 3 * i) -= w;
  }
  return f;
}

MatX se53_measurement_row(const Se53Measurement& m) {
  MatX c(m.H.rows(), 15);
  for (int j = 0; j < 5; ++j) c.middleCols(3 * j, 3) = -m.r(j) * m.H;
  return c;
}

VecX se53_predicted(const Se53Measurement& m, const Se53State& st) {
  return m.H * (st.rot.matrix().transpose() * (st.Z * m.r));
}

Vec15 se53_error(const Se53State& est, const Rotation& r, const Mat35& z) {
  const Mat3& rh = est.rot.matrix();
  const Mat3 rtilde = rh * r.matrix().transpose();
  const Mat35 e = rh.transpose() * (est.Z - rtilde * z);
  return Eigen::Map<const Vec15>(e.data());
}

Mat35 se53_truth_Z(const ExtendedPose& x) {
  Mat35 z;
  z << x.vel, x.pos, Mat3::Identity();
  return z;
}

namespace {

Mat3 projector(const Vec3& u) { return Mat3::Identity() - u * u.transpose(); }

Se53Measurement make(Se53Kind kind, MatX h, double r0, double r1, const Vec3& tail, VecX y) {
  Se53Measurement m;
  m.kind = kind;
  m.H = std::move(h);
  m.r << r0, r1, tail;
  m.y = std::move(y);
  m.weight = MatX::Identity(m.H.rows(), m.H.rows());
  return m;
}

MatX row_of(const Vec3& v) { return v.transpose(); }

VecX scalar(double v) { return VecX::Constant(1, v); }

void require_unit(const Vec3& u) {
  if (u.norm() < 1e-6) {
    throw NumericalError(ErrorCode::DegenerateMeasurement, "zero-norm projector input");
  }
}

}  // namespace

Se53Measurement se53_gps_position(const Vec3& p_gps, const Vec3& lever) {
  return make(Se53Kind::GpsPosition, Mat3::Identity(), 0.0, -1.0, p_gps, lever);
}

Se53Measurement se53_gps_velocity(const Vec3& v_gps, const Vec3& omega_cross_lever) {
  return make(Se53Kind::GpsVelocity, Mat3::Identity(), -1.0, 0.0, v_gps, omega_cross_lever);
}

Se53Measurement se53_landmark(const Vec3& y, const Vec3& landmark) {
  return make(Se53Kind::Landmark, Mat3::Identity(), 0.0, -1.0, landmark, y);
}

Se53Measurement se53_bearing(const Vec3& bearing, const Vec3& landmark) {
  require_unit(bearing);
  return make(Se53Kind::Bearing, projector(bearing.normalized()), 0.0, -1.0, landmark,
              Vec3::Zero());
}

Se53Measurement se53_tilt(double y, const Vec3& body_axis, const Vec3& inertial_axis) {
  return make(Se53Kind::Tilt, row_of(body_axis), 0.0, 0.0, inertial_axis, scalar(y));
}

Se53Measurement se53_magnetometer(const Vec3& y, const Vec3& r_m) {
  return make(Se53Kind::Magnetometer, Mat3::Identity(), 0.0, 0.0, r_m, y);
}

Se53Measurement se53_pitot(double y, const Vec3& v_wind) {
  return make(Se53Kind::Pitot, row_of(Vec3::UnitX()), 1.0, 0.0, -v_wind, scalar(y));
}

Se53Measurement se53_dvl(const Vec3& y) {
  return make(Se53Kind::Dvl, Mat3::Identity(), 1.0, 0.0, Vec3::Zero(), y);
}

Se53Measurement se53_optical_flow(const Vec3& f) {
  require_unit(f);
  return make(Se53Kind::OpticalFlow, projector(f.normalized()), 1.0, 0.0, Vec3::Zero(),
              Vec3::Zero());
}

Se53Measurement se53_zero_sideslip(const Vec3& v_wind) {
  return make(Se53Kind::ZeroSideSlip, row_of(Vec3::UnitY()), 1.0, 0.0, -v_wind, scalar(0.0));
}

// ---------------------------------------------------------------- Riccati

namespace {

Mat15 riccati_field(const Mat15& p, const Mat15& f, const MatX& c, const MatX& q, const Mat15& v) {
  Mat15 d = f * p + p * f.transpose() + v;
  if (c.rows() > 0) d -= p * c.transpose() * q * c * p;
  return d;
}

void check_positive(const Mat15& p) {
  const double lo = Eigen::SelfAdjointEigenSolver<Mat15>(p, Eigen::EigenvaluesOnly).eigenvalues()(0);
  if (!(lo > 0.0)) throw NumericalError(ErrorCode::LostPositivity, "Riccati solution lost positivity");
}

}  // namespace

RiccatiState riccati_step(const RiccatiState& rs, const Mat15& f, const MatX& c, double dt) {
  const MatX q = c.rows() > 0 ? rs.Q_gain : MatX();
  const Mat15& p = rs.P;
  const Mat15 k1 = riccati_field(p, f, c, q, rs.V_drive);
  const Mat15 k2 = riccati_field(p + 0.5 * dt * k1, f, c, q, rs.V_drive);
  const Mat15 k3 = riccati_field(p + 0.5 * dt * k2, f, c, q, rs.V_drive);
  const Mat15 k4 = riccati_field(p + dt * k3, f, c, q, rs.V_drive);
  RiccatiState out = rs;
  const Mat15 next = p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  out.P = 0.5 * (next + next.transpose());
  check_positive(out.P);
  return out;
}

// ---------------------------------------------------------------- observer

namespace {

Vec3 attitude_innovation(const Mat35& z, const Se53Gains& gains) {
  Vec3 d = Vec3::Zero();
  for (int i = 0; i < 3; ++i) d += gains.rho(i) * Vec3(z.col(2 + i)).cross(Vec3(gains.frame.col(i)));
  return d;
}

Se53Derivative field_raw(const Mat3& rh, const Mat35& z, const ImuSample& sample, const Vec15& u,
                         const Se53Gains& gains, const Vec3& g) {
  const Mat3 dr = so3::hat(attitude_innovation(z, gains));
  const Mat35 dz = rh * Eigen::Map<const Mat35>(u.data());
  Se53Derivative d;
  d.rot_dot = rh * so3::hat(sample.gyro) + dr * rh;
  d.z_dot = z * se53_A(g) + dr * z + dz;
  d.z_dot.col(0) += rh * sample.accel;
  return d;
}

}  // namespace

Vec3 se53_attitude_innovation(const Se53State& st, const Se53Gains& gains) {
  return attitude_innovation(st.Z, gains);
}

Se53Derivative se53_observer_field(const Se53State& st, const ImuSample& sample, const Vec15& u,
                                   const Se53Gains& gains, const Vec3& g) {
  return field_raw(st.rot.matrix(), st.Z, sample, u, gains, g);
}

namespace {

struct StackedOutput {
  MatX c;
  MatX q;
  VecX z;
};

StackedOutput stack(const std::vector<Se53Measurement>& meas, const Mat3& rh, const Mat35& zh) {
  Eigen::Index rows = 0;
  for (const auto& m : meas) rows += m.H.rows();
  StackedOutput s{MatX::Zero(rows, 15), MatX::Zero(rows, rows), VecX::Zero(rows)};
  Eigen::Index at = 0;
  for (const auto& m : meas) {
    const Eigen::Index n = m.H.rows();
    s.c.middleRows(at, n) = se53_measurement_row(m);
    s.q.block(at, at, n, n) = m.weight;
    s.z.segment(at, n) = m.y - m.H * (rh.transpose() * (zh * m.r));
    at += n;
  }
  return s;
}

struct Stage {
  Mat3 rot_dot;
  Mat35 z_dot;
  Mat15 p_dot;
};

}  // namespace

std::pair<Se53State, RiccatiState> se53_observer_step(const Se53State& st, const RiccatiState& rs,
                                                      const ImuSample& sample,
                                                      const Se53Source& meas, double dt,
                                                      const Se53Gains& gains, const Vec3& g) {
  const Mat15 f = se53_F(sample.gyro, g);
  MatX last_q;

  // The stage rotation is a 3x3 matrix close to SO(3); it is only projected at the end.
  auto field = [&](const Mat3& r, const Mat35& z, const Mat15& p, double tau) {
    const StackedOutput o = stack(meas(tau), r, z);
    Vec15 u = Vec15::Zero();
    if (o.c.rows() > 0) u = -(p * o.c.transpose() * o.q * o.z);
    const Se53Derivative d = field_raw(r, z, sample, u, gains, g);
    last_q = o.q;
    return Stage{d.rot_dot, d.z_dot, riccati_field(p, f, o.c, o.q, rs.V_drive)};
  };

  const double t0 = sample.t;
  const Mat3& r0 = st.rot.matrix();
  const Stage k1 = field(r0, st.Z, rs.P, t0);
  const Stage k2 = field(r0 + 0.5 * dt * k1.rot_dot, st.Z + 0.5 * dt * k1.z_dot,
                         rs.P + 0.5 * dt * k1.p_dot, t0 + 0.5 * dt);
  const Stage k3 = field(r0 + 0.5 * dt * k2.rot_dot, st.Z + 0.5 * dt * k2.z_dot,
                         rs.P + 0.5 * dt * k2.p_dot, t0 + 0.5 * dt);
  const Stage k4 = field(r0 + dt * k3.rot_dot, st.Z + dt * k3.z_dot, rs.P + dt * k3.p_dot,
                         t0 + dt);

  Se53State out;
  out.rot = rotation_project(r0 + dt / 6.0 * (k1.rot_dot + 2.0 * k2.rot_dot + 2.0 * k3.rot_dot +
                                              k4.rot_dot));
  out.Z = st.Z + dt / 6.0 * (k1.z_dot + 2.0 * k2.z_dot + 2.0 * k3.z_dot + k4.z_dot);
  RiccatiState rs_out = rs;
  const Mat15 p = rs.P + dt / 6.0 * (k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot);
  rs_out.P = 0.5 * (p + p.transpose());
  rs_out.Q_gain = last_q;
  check_positive(rs_out.P);
  return {out, rs_out};
}

std::pair<Se53State, RiccatiState> se53_observer_step(
    const Se53State& st, const RiccatiState& rs, const ImuSample& sample,
    const std::vector<Se53Measurement>& meas, double dt, const Se53Gains& gains, const Vec3& g) {
  return se53_observer_step(
      st, rs, sample, [&meas](double) { return meas; }, dt, gains, g);
}

double gramian_condition(const std::vector<Mat15>& f_seq, const std::vector<MatX>& c_seq,
                         double dt) {
  Mat15 w = Mat15::Zero();
  Mat15 phi = Mat15::Identity();
  const size_t n = std::min(f_seq.size(), c_seq.size());
  for (size_t k = 0; k < n; ++k) {
    if (c_seq[k].rows() > 0) {
      const MatX cp = c_seq[k] * phi;
      w += cp.transpose() * cp * dt;
    }
    const Mat15 fd = f_seq[k] * dt;
    const Mat15 step = Mat15::Identity() + fd * (Mat15::Identity() + fd / 2.0 *
                                                 (Mat15::Identity() + fd / 3.0 *
                                                  (Mat15::Identity() + fd / 4.0)));
    phi = step * phi;
  }
  const Vec15 ev = Eigen::SelfAdjointEigenSolver<Mat15>(w, Eigen::EigenvaluesOnly).eigenvalues();
  if (!(ev(0) > 0.0)) return std::numeric_limits<double>::infinity();
  return ev(14) / ev(0);
}

// ---------------------------------------------------------------- synchronous

Mat2 sync_closed_loop(const RowVec2& l) { return constants::S() - constants::C() * l; }

Mat32 sync_coupled_error(const SyncState& st, const ExtendedPose& truth) {
  const Mat3 rt = st.pose.rot.matrix() * truth.rot.matrix().transpose();
  Mat32 zh, z;
  zh << st.pose.vel, st.pose.pos;
  z << truth.vel, truth.pos;
  const Mat32 ztilde = zh - rt * z;
  return rt.transpose() * ztilde + (Mat3::Identity() - rt.transpose()) * st.psi;
}

namespace {

struct SyncStage {
  Mat3 rot_dot;
  Mat32 z_dot;
  Mat32 psi_dot;
};

SyncStage sync_field(const Mat3& r, const Mat32& z, const Mat32& psi, const SyncState& gains,
                     const ImuSample& sample, const Vec3& y, const Vec3& g) {
  const Vec3 zc = z.col(1);
  const Vec3 psic = psi.col(1);
  const Vec3 dr_vec = gains.rho * (zc - psic).cross(y - psic);
  const Mat3 dr = so3::hat(dr_vec);
  const Mat32 dz = -dr * psi + (y - zc) * gains.L;
  const Mat32 gamma = (y - psic) * gains.L;
  const Mat2 s = constants::S();
  const Vec2 b = constants::B();

  SyncStage d;
  d.rot_dot = r * so3::hat(sample.gyro) + dr * r;
  d.z_dot = z * s + dr * z + (g + r * sample.accel) * b.transpose() + dz;
  d.psi_dot = psi * s + g * b.transpose() + gamma;
  return d;
}

}  // namespace

SyncState sync_observer_step(const SyncState& st, const ImuSample& sample, const PositionSource& y,
                             double dt, const Vec3& g) {
  const double t0 = sample.t;
  const Mat3& r0 = st.pose.rot.matrix();
  Mat32 z0;
  z0 << st.pose.vel, st.pose.pos;

  const SyncStage k1 = sync_field(r0, z0, st.psi, st, sample, y(t0), g);
  const SyncStage k2 = sync_field(r0 + 0.5 * dt * k1.rot_dot, z0 + 0.5 * dt * k1.z_dot,
                                  st.psi + 0.5 * dt * k1.psi_dot, st, sample, y(t0 + 0.5 * dt), g);
  const SyncStage k3 = sync_field(r0 + 0.5 * dt * k2.rot_dot, z0 + 0.5 * dt * k2.z_dot,
                                  st.psi + 0.5 * dt * k2.psi_dot, st, sample, y(t0 + 0.5 * dt), g);
  const SyncStage k4 = sync_field(r0 + dt * k3.rot_dot, z0 + dt * k3.z_dot,
                                  st.psi + dt * k3.psi_dot, st, sample, y(t0 + dt), g);

  SyncState out = st;
  out.pose.rot = rotation_project(
      r0 + dt / 6.0 * (k1.rot_dot + 2.0 * k2.rot_dot + 2.0 * k3.rot_dot + k4.rot_dot));
  const Mat32 z = z0 + dt / 6.0 * (k1.z_dot + 2.0 * k2.z_dot + 2.0 * k3.z_dot + k4.z_dot);
  out.pose.vel = z.col(0);
  out.pose.pos = z.col(1);
  out.psi = st.psi + dt / 6.0 * (k1.psi_dot + 2.0 * k2.psi_dot + 2.0 * k3.psi_dot + k4.psi_dot);
  return out;
}

SyncState sync_observer_step(const SyncState& st, const ImuSample& sample, const Vec3& y,
                             double dt, const Vec3& g) {
  return sync_observer_step(st, sample, [&y](double) { return y; }, dt, g);
}

}  // namespace ains
