#include "ains/se53x.hpp"
#include "ains/simkit.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <numbers>

using namespace ains;

namespace {

Vec15 vec(const Mat35& m) { return Eigen::Map<const Vec15>(m.data()); }

MatX kron(const MatX& a, const MatX& b) {
  MatX k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

Mat35 random_z(oracle::Rng& rng, double scale) {
  Mat35 z;
  for (int i = 0; i < 15; ++i) z.data()[i] = scale * rng.normal();
  return z;
}

struct Pair {
  Rotation r;
  Mat35 z;
  Se53State est;
};

Pair random_pair(oracle::Rng& rng, double err) {
  Pair p;
  const ExtendedPose x = rng.pose(5.0);
  p.r = x.rot;
  p.z = se53_truth_Z(x);
  p.est.rot = Rotation(rng.rotation());
  p.est.Z = p.z + random_z(rng, err);
  return p;
}

// One row of each supported kind, generated noise-free at the truth (r, z).
std::vector<Se53Measurement> all_rows(const Pair& p, oracle::Rng& rng) {
  const Mat3 rt = p.r.matrix().transpose();
  const Vec3 v = p.z.col(0), pos = p.z.col(1);
  const Vec3 lever = rng.vec3(0.5), wl = rng.vec3(0.3), lm = rng.vec3(10.0), wind = rng.vec3(2.0);
  const Vec3 rm = Vec3(0.3, -0.2, 0.9).normalized();
  std::vector<Se53Measurement> out;
  out.push_back(se53_gps_position(pos + p.r.matrix() * lever, lever));
  out.push_back(se53_gps_velocity(v + p.r.matrix() * wl, wl));
  out.push_back(se53_landmark(rt * (lm - pos), lm));
  out.push_back(se53_bearing((rt * (lm - pos)).normalized(), lm));
  out.push_back(se53_tilt(Vec3::UnitZ().dot(rt * Vec3::UnitZ()), Vec3::UnitZ(), Vec3::UnitZ()));
  out.push_back(se53_magnetometer(rt * rm, rm));
  out.push_back(se53_pitot(Vec3::UnitX().dot(rt * (v - wind)), wind));
  out.push_back(se53_dvl(rt * v));
  out.push_back(se53_optical_flow((rt * v).normalized()));
  // side-slip is a constraint: pick the wind so that the truth satisfies it
  out.push_back(se53_zero_sideslip(v - p.r.matrix() * Vec3(2.0, 0.0, -0.5)));
  return out;
}

// d/dt (R_hat^T Z_hat) from the observer field.
Mat35 body_rate(const Se53State& st, const ImuSample& s, const Vec15& u, const Se53Gains& g) {
  const Se53Derivative d = se53_observer_field(st, s, u, g);
  return d.rot_dot.transpose() * st.Z + st.rot.matrix().transpose() * d.z_dot;
}

struct Se53Run {
  std::vector<double> xi;
  double p_min = 1e300;
  double p_max = 0.0;
  double final_att = 0.0;
};

// Noise-free circular scenario with GPS position and the three frame outputs.
Se53Run run_se53(const Se53State& start, double seconds) {
  Scenario sc = scenario_ex5(false);
  sc.duration = seconds;
  const TruthStream truth = generate_truth(sc);
  auto src = [&](double tau) {
    const ExtendedPose x = truth.at(tau);
    std::vector<Se53Measurement> out{se53_gps_position(x.pos, Vec3::Zero())};
    for (int i = 0; i < 3; ++i) {
      const Vec3 e = Vec3::Unit(i);
      out.push_back(se53_magnetometer(x.rot.matrix().transpose() * e, e));
    }
    return out;
  };
  Se53State st = start;
  RiccatiState rs;
  Se53Run run;
  const long n = static_cast<long>(truth.imu.size());
  for (long k = 0; k <= n; ++k) {
    const ExtendedPose& x = truth.states[k];
    run.xi.push_back(se53_error(st, x.rot, se53_truth_Z(x)).norm());
    if (k == n) {
      run.final_att = rotation_angle(st.rot.matrix() * x.rot.matrix().transpose());
      break;
    }
    std::tie(st, rs) = se53_observer_step(st, rs, truth.imu[k], Se53Source(src), truth.dt);
    const auto ev = Eigen::SelfAdjointEigenSolver<Mat15>(rs.P, Eigen::EigenvaluesOnly).eigenvalues();
    run.p_min = std::min(run.p_min, ev(0));
    run.p_max = std::max(run.p_max, ev(14));
  }
  return run;
}

Se53State perturbed(const ExtendedPose& x0, const Vec3& axis, double angle) {
  Se53State st;
  st.rot = so3::exp(axis.normalized() * angle) * x0.rot;
  st.Z = se53_truth_Z(x0);
  st.Z.col(0) += Vec3(1, -0.5, 0.2);
  st.Z.col(1) += Vec3(-2, 1, 0.5);
  return st;
}

}  // namespace

TEST(Se53F, StructureAtRest) {
  const Mat15 f = se53_F(Vec3::Zero(), Vec3::Zero());
  const Mat5 a = se53_A(Vec3::Zero());
  EXPECT_EQ((a.array() != 0.0).count(), 1);
  EXPECT_EQ(MatX(f), kron(a.transpose(), Mat3::Identity()));
  const Mat5 ag = se53_A(constants::kGravity);
  EXPECT_EQ((ag.array() != 0.0).count(), 2);
}

TEST(Se53F, VecIdentity) {
  oracle::Rng rng(80);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 w = rng.vec3(1.0);
    const Mat35 m = random_z(rng, 1.0);
    const Mat35 expect = m * se53_A() - oracle::skew(w) * m;
    EXPECT_LT((se53_F(w) * vec(m) - vec(expect)).norm(), 1e-12);
  }
}

TEST(Se53F, PropagatesNonlinearError) {
  // Uncorrected observer (rho = 0, u = 0): xi_dot = F xi, so over a step with
  // constant inputs xi(h) = expm(F h) xi(0).
  oracle::Rng rng(81);
  Se53Gains off;
  off.rho.setZero();
  const std::vector<Se53Measurement> none;
  for (int trial = 0; trial < 20; ++trial) {
    const Pair p = random_pair(rng, 2.0);
    const ImuSample s{0.0, rng.vec3(0.5), rng.vec3(3.0)};
    const Vec15 xi0 = se53_error(p.est, p.r, p.z);
    const Se53State truth{p.r, p.z};
    const Mat15 f = se53_F(s.gyro);
    for (double h : {1e-5, 1e-2}) {
      RiccatiState rs;
      const Se53State e1 = se53_observer_step(p.est, rs, s, none, h, off).first;
      const Se53State t1 = se53_observer_step(truth, rs, s, none, h, off).first;
      const Vec15 xi1 = se53_error(e1, t1.rot, t1.Z);
      const Vec15 expect = oracle::expm(f * h) * xi0;
      EXPECT_LT((xi1 - expect).norm(), 1e-9 * xi0.norm()) << h;
      if (h == 1e-5) {
        EXPECT_LT(((xi1 - xi0) / h - f * xi0).norm(), 1e-6 * (1 + (f * xi0).norm()) + 1e-4 * (f * f * xi0).norm());
      }
    }
  }
}

TEST(Se53Rows, TablePatterns) {
  const Se53Measurement dvl = se53_dvl(Vec3(1, 2, 3));
  Vec5 r;
  r << 1, 0, 0, 0, 0;
  EXPECT_EQ(dvl.r, r);
  EXPECT_EQ(se53_measurement_row(dvl), -kron(r.transpose(), Mat3::Identity()));
  const Vec3 a(0.3, 0.1, 0.9);
  const Se53Measurement mag = se53_magnetometer(Vec3(0, 0, 1), a);
  r << 0, 0, a;
  EXPECT_EQ(mag.r, r);
  EXPECT_EQ(MatX(mag.H), MatX(Mat3::Identity()));
  EXPECT_THROW(se53_bearing(Vec3::Zero(), a), NumericalError);
  EXPECT_THROW(se53_optical_flow(Vec3(1e-9, 0, 0)), NumericalError);
}

TEST(Se53Rows, InnovationIsExactlyLinear) {
  oracle::Rng rng(82);
  for (double err : {0.01, 1.0, 3.0}) {
    for (int trial = 0; trial < 50; ++trial) {
      const Pair p = random_pair(rng, err);
      const Vec15 xi = se53_error(p.est, p.r, p.z);
      ASSERT_LT(xi.norm(), 10.0 * std::sqrt(15.0) * err + 60.0);
      const Se53State truth{p.r, p.z};
      for (const Se53Measurement& m : all_rows(p, rng)) {
        // the stored output is the truth's output
        EXPECT_LT((m.y - se53_predicted(m, truth)).norm(), 1e-12 * (1 + m.y.norm())) << to_string(m.kind);
        const VecX z = m.y - se53_predicted(m, p.est);
        const VecX cxi = se53_measurement_row(m) * xi;
        EXPECT_LT((z - cxi).norm(), 1e-12 * (1 + xi.norm())) << to_string(m.kind) << " |xi| " << xi.norm();
      }
    }
  }
}

TEST(Se53Rows, ExactAtLargeError) {
  oracle::Rng rng(83);
  int large = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Pair p = random_pair(rng, 1.0);
    Vec15 xi = se53_error(p.est, p.r, p.z);
    // scale the estimate's translational error so that |xi| lands in (5, 10]
    const double target = rng.uniform(5.0, 10.0);
    const Mat35 base = p.est.rot.matrix() * p.r.matrix().transpose() * p.z;
    p.est.Z = base + (p.est.Z - base) * (target / xi.norm());
    xi = se53_error(p.est, p.r, p.z);
    ASSERT_NEAR(xi.norm(), target, 1e-9);
    ++large;
    for (const Se53Measurement& m : all_rows(p, rng)) {
      const VecX z = m.y - se53_predicted(m, p.est);
      EXPECT_LT((z - se53_measurement_row(m) * xi).norm(), 1e-12 * (1 + xi.norm())) << to_string(m.kind);
    }
  }
  EXPECT_EQ(large, 200);
}

TEST(Se53Field, AttitudeCorrectionCancels) {
  oracle::Rng rng(84);
  Se53Gains off, strong;
  off.rho.setZero();
  strong.rho = Vec3(10.0, 25.0, 40.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Pair p = random_pair(rng, 2.0);
    const ImuSample s{0.0, rng.vec3(0.5), rng.vec3(3.0)};
    Vec15 u;
    for (int i = 0; i < 15; ++i) u(i) = rng.normal();
    const Mat35 a = body_rate(p.est, s, u, off);
    const Mat35 b = body_rate(p.est, s, u, strong);
    EXPECT_LT((a - b).norm(), 1e-10 * (1 + a.norm()));
    // and the correction does act on the attitude itself
    EXPECT_GT((se53_observer_field(p.est, s, u, strong).rot_dot - se53_observer_field(p.est, s, u, off).rot_dot).norm(), 1e-6);
  }
}

TEST(Riccati, LyapunovAndConstant) {
  RiccatiState rs;
  oracle::Rng rng(85);
  const MatX m = MatX::Random(15, 15);
  rs.P = Mat15(m * m.transpose() + Mat15::Identity());
  rs.V_drive.setZero();
  const MatX none(0, 15);
  EXPECT_LT((riccati_step(rs, Mat15::Zero(), none, 0.1).P - rs.P).norm(), 1e-14);
  // Lyapunov flow: P(t) = e^{Ft} P e^{F^T t}
  Mat15 f;
  for (int i = 0; i < 225; ++i) f.data()[i] = 0.2 * rng.normal();
  RiccatiState cur = rs;
  for (int k = 0; k < 100; ++k) cur = riccati_step(cur, f, none, 0.01);
  const MatX e = oracle::expm(f * 1.0);
  EXPECT_LT((cur.P - e * rs.P * e.transpose()).norm(), 1e-8 * rs.P.norm());
}

TEST(Riccati, ScalarSteadyState) {
  for (double q : {0.5, 2.0}) {
    for (double v : {0.1, 3.0}) {
      RiccatiState rs;
      rs.P = Mat15::Identity() * 5.0;
      rs.V_drive = Mat15::Identity() * v;
      rs.Q_gain = MatX::Identity(15, 15) * q;
      const MatX c = MatX::Identity(15, 15);
      for (int k = 0; k < 5000; ++k) rs = riccati_step(rs, Mat15::Zero(), c, 0.01);
      EXPECT_LT((rs.P - Mat15::Identity() * std::sqrt(v / q)).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Riccati, SymmetryAndPositivity) {
  oracle::Rng rng(86);
  RiccatiState rs;
  Mat15 f;
  for (int i = 0; i < 225; ++i) f.data()[i] = 0.1 * rng.normal();
  MatX c(3, 15);
  for (int i = 0; i < 45; ++i) c.data()[i] = rng.normal();
  rs.Q_gain = MatX::Identity(3, 3);
  for (int k = 0; k < 10000; ++k) rs = riccati_step(rs, f, c, 0.001);
  EXPECT_LT((rs.P - rs.P.transpose()).norm(), 1e-10);

  RiccatiState bad;
  bad.P = Mat15::Identity();
  bad.V_drive.setZero();
  bad.Q_gain = MatX::Identity(15, 15) * 1000.0;
  try {
    riccati_step(bad, Mat15::Zero(), MatX::Identity(15, 15), 1.0);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.code(), ErrorCode::LostPositivity);
  }
}

TEST(Se53Observer, TracksTruthFromTruth) {
  Scenario sc = scenario_ex5(false);
  const ExtendedPose x0 = generate_truth(sc).states[0];
  const Se53Run run = run_se53(Se53State{x0.rot, se53_truth_Z(x0)}, 10.0);
  double worst = 0;
  for (double e : run.xi) worst = std::max(worst, e);
  // RK4 truncation only
  EXPECT_LT(worst, 1e-6);
  EXPECT_LT(run.final_att, 1e-8);
}

TEST(Se53Observer, TranslationalErrorDecays) {
  const ExtendedPose x0 = generate_truth(scenario_ex5(false)).states[0];
  const Se53Run run = run_se53(perturbed(x0, Vec3(0.3, -0.2, 0.5), 120.0 * std::numbers::pi / 180.0), 60.0);
  const double initial = run.xi.front();
  ASSERT_GT(initial, 1.0);
  EXPECT_LT(run.xi[3000], 1e-3 * initial);
  // P stays in a fixed bracket over the 60 s run
  EXPECT_GT(run.p_min, 1e-2);
  EXPECT_LT(run.p_max, 2e3);
}

TEST(Se53Observer, AttitudeConvergesFromLargeErrors) {
  const ExtendedPose x0 = generate_truth(scenario_ex5(false)).states[0];
  oracle::Rng rng(87);
  int converged = 0;
  for (int trial = 0; trial < 10; ++trial) {
    // angles up to 170 deg keep the start away from the antipodal set
    const double angle = rng.uniform(0.0, 170.0) * std::numbers::pi / 180.0;
    const Se53Run run = run_se53(perturbed(x0, rng.vec3(1.0), angle), 30.0);
    converged += run.final_att < 2.0 * std::numbers::pi / 180.0;
  }
  EXPECT_EQ(converged, 10);
}

TEST(Se53Observer, GramianConditionFinite) {
  std::vector<Mat15> fs;
  std::vector<MatX> cs;
  const TruthStream tr = generate_truth(scenario_ex5(false));
  for (int k = 0; k < 500; ++k) {
    fs.push_back(se53_F(tr.imu[k].gyro));
    MatX c(12, 15);
    c.topRows(3) = se53_measurement_row(se53_gps_position(tr.states[k].pos, Vec3::Zero()));
    for (int i = 0; i < 3; ++i)
      c.middleRows(3 + 3 * i, 3) = se53_measurement_row(se53_magnetometer(Vec3::Zero(), Vec3::Unit(i)));
    cs.push_back(c);
  }
  const double cond = gramian_condition(fs, cs, tr.dt);
  EXPECT_TRUE(std::isfinite(cond));
  EXPECT_GT(cond, 1.0);
  // GPS alone leaves the Q block unobservable over a short window
  std::vector<MatX> gps_only;
  for (int k = 0; k < 500; ++k) gps_only.push_back(cs[k].topRows(3));
  EXPECT_GT(gramian_condition(fs, gps_only, tr.dt), cond);
}

// ---------------------------------------------------------------- synchronous

TEST(Sync, ClosedLoopMatrixAndRoots) {
  oracle::Rng rng(88);
  for (int trial = 0; trial < 100; ++trial) {
    const RowVec2 l(rng.uniform(0.01, 10.0), rng.uniform(0.01, 10.0));
    const Mat2 m = sync_closed_loop(l);
    Mat2 expect;
    expect << 0, 1, -l(0), -l(1);
    EXPECT_EQ(m, expect);
    // roots of lambda^2 + l2 lambda + l1
    const std::complex<double> disc = std::sqrt(std::complex<double>(l(1) * l(1) - 4 * l(0)));
    for (const auto& root : {(-l(1) + disc) / 2.0, (-l(1) - disc) / 2.0}) EXPECT_LT(root.real(), 0.0);
    const auto ev = Eigen::EigenSolver<Mat2>(m).eigenvalues();
    EXPECT_LT(ev(0).real(), 0.0);
    EXPECT_LT(ev(1).real(), 0.0);
  }
  const auto ev = Eigen::EigenSolver<Mat2>(sync_closed_loop(RowVec2(2.0, 3.0))).eigenvalues();
  std::vector<double> re = {ev(0).real(), ev(1).real()};
  std::sort(re.begin(), re.end());
  EXPECT_NEAR(re[0], -2.0, 1e-12);
  EXPECT_NEAR(re[1], -1.0, 1e-12);
}

namespace {

struct SyncRun {
  std::vector<double> t;
  std::vector<Mat32> xi;
  SyncState final;
  ExtendedPose truth_final;
};

SyncRun run_sync(const SyncState& start, double seconds) {
  Scenario sc = scenario_ex5(false);
  sc.duration = seconds;
  const TruthStream tr = generate_truth(sc);
  SyncState st = start;
  SyncRun out;
  const long n = static_cast<long>(tr.imu.size());
  for (long k = 0; k <= n; ++k) {
    out.t.push_back(k * tr.dt);
    out.xi.push_back(sync_coupled_error(st, tr.states[k]));
    if (k == n) break;
    st = sync_observer_step(st, tr.imu[k], PositionSource([&](double t) { return tr.at(t).pos; }), tr.dt);
  }
  out.final = st;
  out.truth_final = tr.states.back();
  return out;
}

}  // namespace

TEST(Sync, TruthInitializedTracks) {
  // Innovations vanish at the truth whatever Psi holds; Psi keeps its own dynamics.
  const ExtendedPose x0 = generate_truth(scenario_ex5(false)).states[0];
  SyncState st;
  st.pose = x0;
  st.psi << Vec3(0.5, 0.0, 0.0), Vec3(3.0, -1.0, 0.0);
  const SyncRun run = run_sync(st, 10.0);
  EXPECT_LT((run.final.pose.matrix() - run.truth_final.matrix()).norm(), 1e-6);
  double worst = 0.0;
  for (const Mat32& xi : run.xi) worst = std::max(worst, xi.norm());
  EXPECT_LT(worst, 1e-6);
}

TEST(Sync, CoupledErrorFollowsLinearFlow) {
  const ExtendedPose x0 = generate_truth(scenario_ex5(false)).states[0];
  oracle::Rng rng(89);
  for (int trial = 0; trial < 3; ++trial) {
    SyncState st;
    st.pose = x0;
    st.pose.rot = so3::exp(rng.vec3(1.0)) * x0.rot;
    st.pose.vel += rng.vec3(1.0);
    st.pose.pos += rng.vec3(2.0);
    st.psi << st.pose.vel, st.pose.pos;
    const SyncRun run = run_sync(st, 10.0);
    const Mat2 m = sync_closed_loop(st.L);
    double worst = 0.0;
    for (std::size_t k = 0; k < run.t.size(); k += 10) {
      const Mat32 lin = run.xi[0] * oracle::expm(m * run.t[k]);
      worst = std::max(worst, (run.xi[k] - lin).norm());
    }
    EXPECT_LT(worst, 1e-6) << trial;

    // log-slope of the decay against the slowest eigenvalue (-1 for L = (2, 3))
    const std::size_t a = 200, b = 1000;
    const double slope = (std::log(run.xi[b].norm()) - std::log(run.xi[a].norm())) / (run.t[b] - run.t[a]);
    EXPECT_NEAR(slope, -1.0, 0.1) << trial;
  }
}

TEST(Sync, ArbitraryPsiStartConvergesWithStep) {
  // With Psi far from (v, p) the rotational gain is large; the mismatch with the
  // linear flow is then RK4 truncation and shrinks as dt^4.
  auto mismatch = [](double rate) {
    Scenario sc = scenario_ex5(false);
    sc.duration = 10.0;
    sc.imu_rate = rate;
    const TruthStream tr = generate_truth(sc);
    SyncState st;
    st.pose = tr.states[0];
    st.pose.rot = so3::exp(Vec3(0.3, -0.5, 0.8)) * st.pose.rot;
    st.pose.pos += Vec3(1, 2, -1);
    st.psi << Vec3(0.3, 0.1, -0.2), Vec3(1, -1, 0.5);
    const Mat32 xi0 = sync_coupled_error(st, tr.states[0]);
    const Mat2 m = sync_closed_loop(st.L);
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.imu.size(); ++k) {
      st = sync_observer_step(st, tr.imu[k], PositionSource([&](double t) { return tr.at(t).pos; }), tr.dt);
      const Mat32 lin = xi0 * oracle::expm(m * ((k + 1) * tr.dt));
      worst = std::max(worst, (sync_coupled_error(st, tr.states[k + 1]) - lin).norm());
    }
    return worst;
  };
  const double coarse = mismatch(100.0);
  const double fine = mismatch(200.0);
  EXPECT_LT(coarse, 1e-6);
  EXPECT_GT(coarse / fine, 10.0);
}
