#include "ains/observability.hpp"

#include "ains/strapdown.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace ains {

MatX observability_matrix(const std::vector<MatX>& h_seq, const Mat9& a, int horizon) {
  if (h_seq.empty() || horizon < 1) {
    throw NumericalError(ErrorCode::InvalidArgument, "observability_matrix needs rows and horizon");
  }
  Eigen::Index rows = 0;
  for (int k = 0; k < horizon; ++k) rows += h_seq[k % h_seq.size()].rows();
  MatX out(rows, 9);
  Mat9 power = Mat9::Identity();
  Eigen::Index at = 0;
  for (int k = 0; k < horizon; ++k) {
    const MatX& h = h_seq[k % h_seq.size()];
    out.middleRows(at, h.rows()) = h * power;
    at += h.rows();
    power = a * power;
  }
  return out;
}

ObservabilityReport null_space(const MatX& m, double tol) {
  ObservabilityReport rep;
  const Eigen::Index n = m.cols();
  MatX padded = m;
  if (m.rows() < n) {
    padded = MatX::Zero(n, n);
    padded.topRows(m.rows()) = m;
  }
  Eigen::JacobiSVD<MatX> svd(padded, Eigen::ComputeFullV);
  const VecX s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(s.size(), m.rows()); ++i) {
    rep.singular_values.push_back(s(i));
  }
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (smax > 0.0 && s(i) > tol * smax) ++rank;
  }
  rep.rank = rank;
  for (Eigen::Index i = rank; i < n; ++i) rep.null_basis.push_back(svd.matrixV().col(i));
  return rep;
}

MatX landmark_row(const Vec3& landmark) {
  MatX h = MatX::Zero(3, 9);
  h.block<3, 3>(0, 0) = -so3::hat(landmark);
  h.block<3, 3>(0, 6) = Mat3::Identity();
  return h;
}

MatX dvl_row() {
  MatX h = MatX::Zero(3, 9);
  h.block<3, 3>(0, 3) = -Mat3::Identity();
  return h;
}

MatX magnetometer_row(const Vec3& r_m) {
  MatX h = MatX::Zero(3, 9);
  h.block<3, 3>(0, 0) = -so3::hat(r_m);
  return h;
}

MatX gps_row(const Vec3& p_gps) { return landmark_row(p_gps); }

MatX stack_rows(const std::vector<MatX>& rows) {
  Eigen::Index total = 0;
  for (const MatX& r : rows) total += r.rows();
  MatX out(total, 9);
  Eigen::Index at = 0;
  for (const MatX& r : rows) {
    out.middleRows(at, r.rows()) = r;
    at += r.rows();
  }
  return out;
}

namespace {

struct Case {
  const char* name;
  std::vector<MatX> h_seq;
};

std::vector<Case> cases() {
  const Vec3 l1(4.0, -2.0, 1.0);
  const Vec3 l2(4.0, -2.0, -3.0);
  const Vec3 l3(-1.0, 5.0, 0.5);
  const Vec3 l4(2.0, 3.0, -1.0);
  const Vec3 r_m = Vec3(0.5, 0.0, std::sqrt(3.0) / 2.0);
  std::vector<MatX> line;
  // Uneven spacing along the line; evenly spaced fixes leave yaw unobservable.
  const double s[] = {0.0, 0.1, 0.5, 0.6, 1.4, 1.5};
  for (double sk : s) line.push_back(gps_row(Vec3(3.0 * sk, 1.0 * sk, 0.0)));
  return {
      {"single-landmark", {landmark_row(l1)}},
      {"vertical-pair", {stack_rows({landmark_row(l1), landmark_row(l2)})}},
      {"three-landmarks", {stack_rows({landmark_row(l1), landmark_row(l3), landmark_row(l4)})}},
      {"dvl", {dvl_row()}},
      {"static-gps", {gps_row(l1)}},
      {"lateral-gps", line},
      {"gps-mag", {stack_rows({gps_row(l1), magnetometer_row(r_m)})}},
  };
}

}  // namespace

std::vector<std::string> scenario_names() {
  std::vector<std::string> out;
  for (const Case& c : cases()) out.emplace_back(c.name);
  return out;
}

std::vector<ObservabilityReport> scenario_reports(int horizon) {
  const Mat9 a = error_transition(1.0);
  std::vector<ObservabilityReport> out;
  for (const Case& c : cases()) {
    ObservabilityReport rep = null_space(observability_matrix(c.h_seq, a, horizon));
    rep.name = c.name;
    rep.horizon = horizon;
    out.push_back(std::move(rep));
  }
  return out;
}

}  // namespace ains
