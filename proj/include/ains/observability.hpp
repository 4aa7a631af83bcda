#pragma once

#include "ains/liegroups.hpp"

#include <string>
#include <vector>

namespace ains {

struct ObservabilityReport {
  std::string name;
  int rank = 0;
  std::vector<Vec9> null_basis;
  std::vector<double> singular_values;
  int horizon = 0;
};

inline constexpr int kDefaultHorizon = 6;

// Rows H_k A^k for k = 0..horizon-1; H_k cycles through H_seq.
MatX observability_matrix(const std::vector<MatX>& h_seq, const Mat9& a, int horizon);

// SVD rank with tolerance relative to the largest singular value.
ObservabilityReport null_space(const MatX& m, double tol = 1e-8);

// Right-invariant rows at identity-free form (they do not depend on the estimate).
MatX landmark_row(const Vec3& landmark);
MatX dvl_row();
MatX magnetometer_row(const Vec3& r_m);
// Left-invariant GPS row at a measured position.
MatX gps_row(const Vec3& p_gps);
MatX stack_rows(const std::vector<MatX>& rows);

// Canned configurations of the landmark, GPS, compass and DVL examples.
std::vector<ObservabilityReport> scenario_reports(int horizon = kDefaultHorizon);
std::vector<std::string> scenario_names();

}  // namespace ains
