#include "ains/inekf.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

using namespace ains;

namespace {

constexpr SensorKind kAll[] = {
    SensorKind::GpsPosition,   SensorKind::GpsVelocity, SensorKind::Magnetometer,
    SensorKind::Landmark,      SensorKind::Dvl,         SensorKind::Barometer,
    SensorKind::RangeToAnchor, SensorKind::PitotTube,   SensorKind::OpticalFlow,
    SensorKind::BearingToFeature, SensorKind::TiltAngle, SensorKind::ZeroLateralVelocity,
};

// A measurement of `kind` generated noise-free at `truth`.
AidingMeasurement make(SensorKind kind, const ExtendedPose& truth, oracle::Rng& rng) {
  AidingMeasurement m;
  m.kind = kind;
  const int dim = measurement_dim(kind);
  m.noise_cov = 0.01 * MatX::Identity(dim, dim);
  switch (kind) {
    case SensorKind::GpsPosition:
    case SensorKind::GpsVelocity:
      m.param = rng.vec3(0.5);
      m.omega = rng.vec3(0.3);
      break;
    case SensorKind::Magnetometer:
      m.param = Vec3(0.4, 0.1, -0.8);
      break;
    case SensorKind::Landmark:
    case SensorKind::BearingToFeature:
    case SensorKind::RangeToAnchor:
      m.param = truth.pos + Vec3(10, -4, 3) + rng.vec3(1.0);
      break;
    case SensorKind::PitotTube:
      m.param = rng.vec3(1.0);
      break;
    default:
      break;
  }
  m.value = measurement_model(m, truth);
  return m;
}

ExtendedPose random_state(oracle::Rng& rng) {
  ExtendedPose x = rng.pose(3.0);
  x.vel += Vec3(5, 1, 0);
  return x;
}

MatX random_spd(oracle::Rng& rng, int n, double scale) {
  MatX m(n, n);
  for (int i = 0; i < n * n; ++i) m.data()[i] = rng.normal();
  return scale * (m * m.transpose() + 0.1 * MatX::Identity(n, n));
}

double trace_of(const MatX& m) { return m.trace(); }

}  // namespace

TEST(SensorKind, NamesRoundTrip) {
  for (SensorKind k : kAll) {
    const auto back = sensor_kind_from_string(to_string(k));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, k);
  }
  EXPECT_FALSE(sensor_kind_from_string("Lidar").has_value());
}

TEST(Linearize, MagnetometerAtIdentity) {
  AidingMeasurement m;
  m.kind = SensorKind::Magnetometer;
  m.param = Vec3(0.3, 0.0, 0.9);
  m.value = Vec3(0.2, 0.1, 0.95);
  m.noise_cov = 0.01 * MatX::Identity(3, 3);
  const LinearizedUpdate u = linearize(m, ExtendedPose{});
  MatX h = MatX::Zero(3, 9);
  h.leftCols(3) = -oracle::skew(m.param);
  EXPECT_EQ(u.H, h);
  EXPECT_LT((u.z - (m.value - m.param)).norm(), 1e-15);
  EXPECT_EQ(u.tag, Invariance::Right);
}

TEST(Linearize, GpsPositionNoLever) {
  oracle::Rng rng(50);
  const ExtendedPose xh = random_state(rng);
  AidingMeasurement m;
  m.kind = SensorKind::GpsPosition;
  m.value = Vec3(4, -2, 7);
  m.noise_cov = MatX::Identity(3, 3);
  const LinearizedUpdate u = linearize(m, xh);
  MatX h = MatX::Zero(3, 9);
  h.leftCols(3) = -oracle::skew(m.value);
  h.rightCols(3) = Mat3::Identity();
  EXPECT_EQ(u.H, h);
  // processed innovation: Pi X_hat r - Pi y_bar with r = (0,0,0,0,1)
  Vec5 r = Vec5::Zero();
  r(4) = 1.0;
  const Vec3 pi_xr = (xh.matrix() * r).head<3>();
  EXPECT_LT((u.z - (pi_xr - m.value)).norm(), 1e-12);
  EXPECT_EQ(u.tag, Invariance::Left);
}

TEST(Linearize, ZeroInnovationAtTruth) {
  oracle::Rng rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const ExtendedPose x = random_state(rng);
    for (SensorKind k : kAll) {
      const AidingMeasurement m = make(k, x, rng);
      EXPECT_LT(linearize(m, x).z.norm(), 1e-12) << to_string(k);
      EXPECT_LT(mekf_linearize(m, x).z.norm(), 1e-12) << to_string(k);
    }
  }
}

TEST(Linearize, MatchesFiniteDifference) {
  // z(X_hat; y(X)) with X = exp(-eps xi) X_hat against eps H xi.
  oracle::Rng rng(52);
  const double eps = 1e-6;
  for (SensorKind k : kAll) {
    for (int trial = 0; trial < 20; ++trial) {
      const ExtendedPose xh = random_state(rng);
      AidingMeasurement m = make(k, xh, rng);
      const Vec9 xi = rng.tangent(1.0, 1.0);
      const ExtendedPose x = se23::exp(-eps * xi) * xh;
      m.value = measurement_model(m, x);
      const LinearizedUpdate u = linearize(m, xh);
      const VecX lin = u.H * xi;
      const VecX fd = u.z / eps;
      EXPECT_LT((fd - lin).norm(), 1e-4 * std::max(1.0, lin.norm())) << to_string(k) << " trial " << trial;
    }
  }
}

TEST(Linearize, MekfMatchesFiniteDifference) {
  // Error (theta, dv, dp): R = exp(-theta) R_hat, v = v_hat + dv, p = p_hat + dp.
  oracle::Rng rng(53);
  const double eps = 1e-6;
  for (SensorKind k : kAll) {
    for (int trial = 0; trial < 20; ++trial) {
      const ExtendedPose xh = random_state(rng);
      AidingMeasurement m = make(k, xh, rng);
      const Vec9 d = rng.tangent(1.0, 1.0);
      ExtendedPose x;
      x.rot = so3::exp(-eps * Vec3(d.head<3>())) * xh.rot;
      x.vel = xh.vel + eps * d.segment<3>(3);
      x.pos = xh.pos + eps * d.tail<3>();
      m.value = measurement_model(m, x);
      const LinearizedUpdate u = mekf_linearize(m, xh);
      const VecX lin = u.H * d;
      EXPECT_LT((u.z / eps - lin).norm(), 1e-4 * std::max(1.0, lin.norm())) << to_string(k);
    }
  }
}

TEST(Linearize, RightInvariantJacobianIsStateFree) {
  oracle::Rng rng(54);
  const ExtendedPose x0 = random_state(rng);
  for (SensorKind k : {SensorKind::Magnetometer, SensorKind::Landmark, SensorKind::Dvl}) {
    const AidingMeasurement m = make(k, x0, rng);
    const MatX h0 = linearize(m, x0).H;
    for (int trial = 0; trial < 10; ++trial) {
      const ExtendedPose x = random_state(rng);
      EXPECT_EQ(linearize(m, x).H, h0) << to_string(k);
      const LinearizedUpdate u = linearize(m, x);
      EXPECT_LT((u.V - x.rot.matrix() * m.noise_cov * x.rot.matrix().transpose()).norm(), 1e-14);
    }
  }
}

TEST(Linearize, LeftInvariantJacobianDependsOnlyOnValue) {
  oracle::Rng rng(55);
  const ExtendedPose x0 = random_state(rng);
  for (SensorKind k : {SensorKind::GpsPosition, SensorKind::GpsVelocity}) {
    const AidingMeasurement m = make(k, x0, rng);
    const MatX h0 = linearize(m, x0).H;
    for (int trial = 0; trial < 10; ++trial) EXPECT_EQ(linearize(m, random_state(rng)).H, h0);
    AidingMeasurement other = m;
    other.value = m.value + Vec3(1, 0, 0);
    EXPECT_NE(linearize(other, x0).H, h0);
  }
}

TEST(Linearize, DegenerateInputsThrow) {
  ExtendedPose x;
  AidingMeasurement flow;
  flow.kind = SensorKind::OpticalFlow;
  flow.value = Vec3::UnitX();
  flow.noise_cov = MatX::Identity(3, 3);
  try {
    linearize(flow, x);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateMeasurement);
  }
  AidingMeasurement range;
  range.kind = SensorKind::RangeToAnchor;
  range.param = Vec3(0, 0, 1e-8);
  range.value = VecX::Constant(1, 1.0);
  range.noise_cov = MatX::Identity(1, 1);
  EXPECT_THROW(linearize(range, x), NumericalError);
  AidingMeasurement bearing;
  bearing.kind = SensorKind::BearingToFeature;
  bearing.param = Vec3(5, 0, 0);
  bearing.value = Vec3(2, 0, 0);
  bearing.noise_cov = MatX::Identity(3, 3);
  EXPECT_THROW(linearize(bearing, x), NumericalError);
}

TEST(Linearize, RangeNoiseMappedByDistance) {
  ExtendedPose x;
  x.pos = Vec3(1, 2, 3);
  AidingMeasurement m;
  m.kind = SensorKind::RangeToAnchor;
  m.param = Vec3(4, 6, 3);
  m.value = VecX::Constant(1, 5.0);
  m.noise_cov = MatX::Constant(1, 1, 0.04);
  const LinearizedUpdate u = linearize(m, x);
  EXPECT_NEAR(u.V(0, 0), 25.0 * 0.04, 1e-14);
  EXPECT_NEAR(u.z(0), 0.0, 1e-14);
}

TEST(KalmanUpdate, MatchesTextbookForm) {
  oracle::Rng rng(56);
  for (int trial = 0; trial < 50; ++trial) {
    const MatX p = random_spd(rng, 9, 0.1);
    MatX h(3, 9);
    for (int i = 0; i < 27; ++i) h.data()[i] = rng.normal();
    const MatX v = random_spd(rng, 3, 0.01);
    VecX z(3);
    z << rng.normal(), rng.normal(), rng.normal();
    const KalmanStep st = kalman_update(p, h, z, v);
    const MatX s = h * p * h.transpose() + v;
    const MatX k = p * h.transpose() * s.inverse();
    EXPECT_LT((st.delta - k * z).norm(), 1e-10 * (1 + (k * z).norm()));
    const MatX post = (MatX::Identity(9, 9) - k * h) * p;
    EXPECT_LT((st.cov - 0.5 * (post + post.transpose())).norm(), 1e-10 * p.norm());
    EXPECT_LE(trace_of(st.cov), trace_of(p) + 1e-12);
    const VecX ev = Eigen::SelfAdjointEigenSolver<MatX>(st.cov).eigenvalues();
    EXPECT_GT(ev(0), -1e-12);

    const KalmanStep joseph = kalman_update(p, h, z, v, CovarianceUpdate::Joseph);
    EXPECT_LT((joseph.cov - st.cov).norm(), 1e-9);
  }
}

TEST(KalmanUpdate, SingularInnovationThrows) {
  const MatX p = MatX::Zero(9, 9);
  const MatX h = MatX::Identity(3, 9);
  const MatX v = MatX::Zero(3, 3);
  try {
    kalman_update(p, h, VecX::Zero(3), v);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularInnovationCov);
  }
}

TEST(Correct, ZeroInnovationKeepsPose) {
  oracle::Rng rng(57);
  NavBelief b{random_state(rng), random_spd(rng, 9, 0.1)};
  AidingMeasurement m = make(SensorKind::GpsPosition, b.pose, rng);
  const LinearizedUpdate u = linearize(m, b);
  const NavBelief post = correct(b, u);
  EXPECT_LT((post.pose.matrix() - b.pose.matrix()).norm(), 1e-15);
  const MatX s = u.H * b.cov * u.H.transpose() + u.V;
  const MatX k = b.cov * u.H.transpose() * s.inverse();
  EXPECT_LT((post.cov - (MatX::Identity(9, 9) - k * u.H) * b.cov).norm(), 1e-10);
}

TEST(Correct, UninformativeMeasurementLeavesBelief) {
  oracle::Rng rng(58);
  NavBelief b{random_state(rng), random_spd(rng, 9, 0.1)};
  AidingMeasurement m = make(SensorKind::Landmark, b.pose, rng);
  m.value = m.value + Vec3(0.5, -0.3, 0.2);
  m.noise_cov = MatX::Identity(3, 3);
  LinearizedUpdate u = linearize(m, b);
  u.V *= 1e12;
  const NavBelief post = correct(b, u);
  EXPECT_LT((post.pose.matrix() - b.pose.matrix()).norm(), 1e-9);
  EXPECT_LT((post.cov - b.cov).norm(), 1e-9);
}

TEST(Correct, ScalarBarometerGain) {
  NavBelief b;
  b.cov = Mat9::Identity() * 0.5;
  b.cov(8, 8) = 4.0;
  AidingMeasurement m;
  m.kind = SensorKind::Barometer;
  m.value = VecX::Constant(1, 1.0);
  m.noise_cov = MatX::Constant(1, 1, 1.0);
  const LinearizedUpdate u = linearize(m, b);
  const NavBelief post = correct(b, u);
  // At the origin H = -e3^T on the position block: gain sigma^2/(sigma^2+v) = 0.8.
  EXPECT_NEAR(post.pose.pos.z(), 0.8, 1e-12);
  EXPECT_NEAR(post.cov(8, 8), 4.0 * (1 - 0.8), 1e-12);
  EXPECT_NEAR(post.cov(0, 0), 0.5, 1e-15);
}

TEST(Correct, PullsTowardTruth) {
  oracle::Rng rng(59);
  const ExtendedPose truth = random_state(rng);
  NavBelief b{se23::exp(rng.tangent(0.05, 0.5)) * truth, Mat9::Identity() * 0.5};
  for (SensorKind k : {SensorKind::GpsPosition, SensorKind::Landmark}) {
    const double before = se23::log(b.pose * truth.inverse()).norm();
    AidingMeasurement m = make(k, truth, rng);
    m.noise_cov *= 1e-4;
    const NavBelief post = correct(b, linearize(m, b));
    EXPECT_LT(se23::log(post.pose * truth.inverse()).norm(), before) << to_string(k);
  }
}

TEST(CorrectExt, ZeroCrossCovarianceKeepsBias) {
  oracle::Rng rng(60);
  NavBeliefExt b;
  b.pose = random_state(rng);
  b.bias = {Vec3(0.01, 0, 0), Vec3(0, 0.02, 0)};
  b.cov.setIdentity();
  b.cov *= 0.1;
  AidingMeasurement m = make(SensorKind::GpsPosition, b.pose, rng);
  m.value = m.value + Vec3(1, 1, 1);
  const NavBeliefExt post = correct_ext(b, linearize(m, b.pose));
  EXPECT_EQ(post.bias.gyro, b.bias.gyro);
  EXPECT_EQ(post.bias.accel, b.bias.accel);
  EXPECT_GT((post.pose.pos - b.pose.pos).norm(), 1e-3);
}

TEST(CorrectExt, MatchesDenseOracle) {
  oracle::Rng rng(61);
  NavBeliefExt b;
  b.pose = random_state(rng);
  b.cov = random_spd(rng, 15, 0.05);
  AidingMeasurement m = make(SensorKind::Landmark, b.pose, rng);
  m.value = m.value + Vec3(0.3, -0.1, 0.2);
  const LinearizedUpdate u = linearize(m, b.pose);
  const NavBeliefExt post = correct_ext(b, u);

  MatX h = MatX::Zero(3, 15);
  h.leftCols(9) = u.H;
  const MatX s = h * b.cov * h.transpose() + u.V;
  const MatX k = b.cov * h.transpose() * s.inverse();
  const VecX dx = k * u.z;
  EXPECT_LT((post.bias.gyro - dx.segment<3>(9)).norm(), 1e-11);
  EXPECT_LT((post.bias.accel - dx.segment<3>(12)).norm(), 1e-11);
  EXPECT_GT(dx.tail<6>().norm(), 1e-6);
  const MatX pcov = (MatX::Identity(15, 15) - k * h) * b.cov;
  EXPECT_LT((post.cov - pcov).norm(), 1e-11);
  const ExtendedPose pose = se23::exp(-Vec9(dx.head<9>())) * b.pose;
  EXPECT_LT((post.pose.matrix() - pose.matrix()).norm(), 1e-11);

  AidingMeasurement exact = make(SensorKind::Landmark, b.pose, rng);
  const NavBeliefExt same = correct_ext(b, linearize(exact, b.pose));
  EXPECT_LT((same.pose.matrix() - b.pose.matrix()).norm(), 1e-13);
  EXPECT_LT(same.bias.gyro.norm() + same.bias.accel.norm(), 1e-13);
}

TEST(Gate, RejectsOutlier) {
  oracle::Rng rng(62);
  NavBelief b{random_state(rng), Mat9::Identity() * 0.01};
  AidingMeasurement m = make(SensorKind::GpsPosition, b.pose, rng);
  EXPECT_TRUE(passes_gate(linearize(m, b), b.cov, 0.999));
  m.value = m.value + Vec3(50, 0, 0);
  EXPECT_FALSE(passes_gate(linearize(m, b), b.cov, 0.999));
}

TEST(Mekf, NoiseFreeTrajectoryMatchesStrapdown) {
  oracle::Rng rng(63);
  const double dt = 0.01;
  MekfBelief mb{random_state(rng), Mat9::Identity() * 0.01};
  NavBelief ib{mb.pose, Mat9::Identity() * 0.01};
  for (int k = 0; k < 500; ++k) {
    const ImuSample s{k * dt, rng.vec3(0.3), rng.vec3(2.0)};
    mb = mekf_step(mb, s, ImuNoiseSpec{}, dt);
    ib = propagate(ib, s, ImuNoiseSpec{}, dt);
  }
  EXPECT_LT((mb.pose.matrix() - ib.pose.matrix()).norm(), 1e-12);
}

TEST(Mekf, VelocityAttitudeBlockIsSpecificForce) {
  // Zero-noise step from an identity covariance: Phi = I + F dt, so the (v, theta)
  // block of the result is (R a)^ dt + transpose contributions.
  oracle::Rng rng(64);
  const double dt = 1e-3;
  MekfBelief b{random_state(rng), Mat9::Zero()};
  b.cov.block<3, 3>(0, 0) = Mat3::Identity();
  const ImuSample s{0.0, Vec3::Zero(), Vec3(0.1, -0.2, 9.81)};
  const MekfBelief n = mekf_step(b, s, ImuNoiseSpec{}, dt);
  const Mat3 f = oracle::skew(b.pose.rot.matrix() * s.accel);
  EXPECT_LT((n.cov.block<3, 3>(3, 0) - f * dt).norm(), 1e-14);
  EXPECT_LT((n.cov.block<3, 3>(3, 3) - f * f.transpose() * dt * dt).norm(), 1e-14);
}

TEST(Mekf, CorrectionConvention) {
  oracle::Rng rng(65);
  const ExtendedPose truth = random_state(rng);
  MekfBelief b{truth, Mat9::Identity() * 0.1};
  b.pose.pos += Vec3(1, 0, 0);
  AidingMeasurement m = make(SensorKind::GpsPosition, truth, rng);
  m.param.setZero();
  m.value = measurement_model(m, truth);
  m.noise_cov *= 1e-6;
  const MekfBelief post = mekf_correct(b, m);
  EXPECT_LT((post.pose.pos - truth.pos).norm(), 1e-3);
}

TEST(Mekf, InvariantToEuclideanFirstOrder) {
  oracle::Rng rng(66);
  for (int trial = 0; trial < 20; ++trial) {
    const ExtendedPose xh = random_state(rng);
    const Mat9 t = invariant_to_euclidean(xh);
    EXPECT_LT((t * t - Mat9::Identity()).norm(), 1e-12);
    const double eps = 1e-7;
    const Vec9 xi = rng.tangent(1.0, 1.0);
    const ExtendedPose x = se23::exp(-eps * xi) * xh;
    Vec9 d;
    d << so3::log(xh.rot * x.rot.inverse()), x.vel - xh.vel, x.pos - xh.pos;
    EXPECT_LT((d / eps - t * xi).norm(), 1e-5 * (1 + xi.norm()));
  }
}
