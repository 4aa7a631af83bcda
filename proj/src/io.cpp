#include "ains/io.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace ains {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

double parse_double(const std::string& s, std::size_t line, const char* column) {
  if (s == "nan") return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CsvError("line " + std::to_string(line) + ": bad number '" + s + "' in column " + column);
  }
}

void expect_header(std::istream& is, const std::string& header) {
  std::string line;
  if (!std::getline(is, line)) throw CsvError("empty input: missing header '" + header + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw CsvError("header mismatch: expected '" + header + "', got '" + line + "'");
}

void pose_cells(std::ostream& os, const ExtendedPose& x) {
  const Eigen::Quaterniond q(x.rot.matrix());
  // sign fixed by qw >= 0 so the columns are a function of R
  const double s = q.w() < 0.0 ? -1.0 : 1.0;
  os << ',' << fmt(s * q.w()) << ',' << fmt(s * q.x()) << ',' << fmt(s * q.y()) << ','
     << fmt(s * q.z());
  for (int i = 0; i < 3; ++i) os << ',' << fmt(x.vel(i));
  for (int i = 0; i < 3; ++i) os << ',' << fmt(x.pos(i));
}

}  // namespace

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_imu_csv(std::ostream& os, const std::vector<ImuSample>& samples) {
  os << "t,gx,gy,gz,ax,ay,az\n";
  for (const auto& s : samples) {
    os << fmt(s.t);
    for (int i = 0; i < 3; ++i) os << ',' << fmt(s.gyro(i));
    for (int i = 0; i < 3; ++i) os << ',' << fmt(s.accel(i));
    os << '\n';
  }
}

std::vector<ImuSample> read_imu_csv(std::istream& is) {
  expect_header(is, "t,gx,gy,gz,ax,ay,az");
  static const char* cols[] = {"t", "gx", "gy", "gz", "ax", "ay", "az"};
  std::vector<ImuSample> out;
  std::string line;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 7) throw CsvError("line " + std::to_string(n) + ": expected 7 columns");
    double v[7];
    for (int i = 0; i < 7; ++i) v[i] = parse_double(c[static_cast<std::size_t>(i)], n, cols[i]);
    out.push_back({v[0], Vec3(v[1], v[2], v[3]), Vec3(v[4], v[5], v[6])});
  }
  return out;
}

void write_measurement_csv(std::ostream& os, const std::vector<AidingMeasurement>& meas) {
  os << "t,kind,v1,v2,v3,aux1,aux2,aux3,noise_std\n";
  for (const auto& m : meas) {
    os << fmt(m.t) << ',' << to_string(m.kind);
    const int dim = measurement_dim(m.kind);
    for (int i = 0; i < 3; ++i) {
      os << ',';
      if (i < dim) os << fmt(m.value(i));
    }
    for (int i = 0; i < 3; ++i) os << ',' << fmt(m.param(i));
    const double sd = m.noise_cov.size() > 0 ? std::sqrt(m.noise_cov(0, 0)) : 0.0;
    os << ',' << fmt(sd) << '\n';
  }
}

std::vector<AidingMeasurement> read_measurement_csv(std::istream& is) {
  expect_header(is, "t,kind,v1,v2,v3,aux1,aux2,aux3,noise_std");
  std::vector<AidingMeasurement> out;
  std::string line;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 9) throw CsvError("line " + std::to_string(n) + ": expected 9 columns");
    AidingMeasurement m;
    m.t = parse_double(c[0], n, "t");
    const auto kind = sensor_kind_from_string(c[1]);
    if (!kind) throw CsvError("line " + std::to_string(n) + ": unknown kind '" + c[1] + "'");
    m.kind = *kind;
    const int dim = measurement_dim(m.kind);
    m.value.resize(dim);
    for (int i = 0; i < 3; ++i) {
      const std::string& cell = c[static_cast<std::size_t>(2 + i)];
      if (i < dim) {
        m.value(i) = parse_double(cell, n, "v");
      } else if (!cell.empty()) {
        throw CsvError("line " + std::to_string(n) + ": unused value column must be empty");
      }
    }
    for (int i = 0; i < 3; ++i) m.param(i) = parse_double(c[static_cast<std::size_t>(5 + i)], n, "aux");
    const double sd = parse_double(c[8], n, "noise_std");
    m.noise_cov = sd * sd * MatX::Identity(dim, dim);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<std::string> run_csv_header() {
  std::vector<std::string> h = {"t",       "err_att_rad", "err_vel", "err_pos", "sig_att",
                                "sig_vel", "sig_pos",     "nees"};
  for (const char* who : {"true", "est"})
    for (const char* c : {"qw", "qx", "qy", "qz", "vx", "vy", "vz", "px", "py", "pz"})
      h.push_back(std::string(who) + "_" + c);
  return h;
}

void write_run_csv(std::ostream& os, const RunRecord& rec) {
  const auto h = run_csv_header();
  for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
  os << '\n';
  for (const RunRow& r : rec.rows) {
    os << fmt(r.t) << ',' << fmt(r.err_att) << ',' << fmt(r.err_vel) << ',' << fmt(r.err_pos)
       << ',' << fmt(r.sig_att) << ',' << fmt(r.sig_vel) << ',' << fmt(r.sig_pos) << ','
       << fmt(r.nees);
    pose_cells(os, r.truth);
    pose_cells(os, r.est);
    os << '\n';
  }
}

namespace {

nlohmann::json num(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

nlohmann::json nums(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

}  // namespace

nlohmann::json matrix_json(const MatX& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json run_summary_json(const RunRecord& rec) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["scenario"] = rec.scenario;
  j["filter"] = to_string(rec.filter);
  j["seed"] = rec.seed;
  j["aborted"] = rec.aborted;
  j["failure"] = rec.failure;
  j["rows"] = rec.rows.size();
  if (!rec.rows.empty()) {
    const RunRow& f = rec.rows.front();
    const RunRow& l = rec.rows.back();
    j["initial"] = {{"err_att_rad", num(f.err_att)}, {"err_vel", num(f.err_vel)},
                    {"err_pos", num(f.err_pos)}};
    j["final"] = {{"t", l.t},
                  {"err_att_rad", num(l.err_att)},
                  {"err_vel", num(l.err_vel)},
                  {"err_pos", num(l.err_pos)},
                  {"nees", num(l.nees)}};
  }
  nlohmann::json inn = nlohmann::json::array();
  for (const auto& s : rec.innovations)
    inn.push_back({{"kind", to_string(s.kind)}, {"count", s.count}, {"mean_nis", num(s.mean_nis())}});
  j["innovations"] = inn;
  return j;
}

nlohmann::json mc_summary_json(const McSummary& s) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["scenario"] = s.scenario;
  j["filter"] = to_string(s.filter);
  j["base_seed"] = s.base_seed;
  j["runs"] = s.runs;
  j["aborted"] = s.aborted;
  j["failures"] = s.failures;
  j["fail_deg"] = s.fail_deg;
  j["nees_window_start"] = s.nees_window_start;
  j["nees_average"] = num(s.nees_average);
  j["t"] = nums(s.t);
  auto q = [](const std::vector<Quantiles>& v) {
    std::vector<double> a, b, c;
    for (const auto& x : v) {
      a.push_back(x.p05);
      b.push_back(x.p50);
      c.push_back(x.p95);
    }
    return nlohmann::json{{"p05", nums(a)}, {"p50", nums(b)}, {"p95", nums(c)}};
  };
  j["err_att_rad"] = q(s.att);
  j["err_vel"] = q(s.vel);
  j["err_pos"] = q(s.pos);
  j["mean_nees"] = nums(s.mean_nees);
  j["final_att_rad"] = nums(s.final_att);
  return j;
}

nlohmann::json report_json(const ObservabilityReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["rank"] = r.rank;
  j["horizon"] = r.horizon;
  j["singular_values"] = nums(r.singular_values);
  nlohmann::json basis = nlohmann::json::array();
  for (const Vec9& v : r.null_basis) basis.push_back(nums(std::vector<double>(v.data(), v.data() + 9)));
  j["null_basis"] = basis;
  return j;
}

nlohmann::json delta_json(const PreintegratedDelta& d) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["duration"] = d.duration;
  j["count"] = d.count;
  j["delta_R"] = matrix_json(d.delta.rot.matrix());
  j["delta_v"] = nums(std::vector<double>(d.delta.vel.data(), d.delta.vel.data() + 3));
  j["delta_p"] = nums(std::vector<double>(d.delta.pos.data(), d.delta.pos.data() + 3));
  j["cov"] = matrix_json(d.cov);
  j["bias_jacobian"] = matrix_json(d.bias_jacobian);
  if (d.cov_ext) j["cov_ext"] = matrix_json(*d.cov_ext);
  return j;
}

void write_fig3_csv(std::ostream& os, const std::vector<Fig3Track>& tracks) {
  os << "dt,k,exact_x,exact_y,exact_z,classical_x,classical_y,classical_z\n";
  for (const Fig3Track& tr : tracks) {
    for (std::size_t k = 0; k < tr.exact.size(); ++k) {
      os << fmt(tr.dt) << ',' << k;
      for (int i = 0; i < 3; ++i) os << ',' << fmt(tr.exact[k](i));
      for (int i = 0; i < 3; ++i) os << ',' << fmt(tr.classical[k](i));
      os << '\n';
    }
  }
}

nlohmann::json fig3_json(const std::vector<Fig3Track>& tracks) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  nlohmann::json a = nlohmann::json::array();
  for (const Fig3Track& tr : tracks)
    a.push_back({{"dt", tr.dt},
                 {"steps", tr.exact.empty() ? 0 : tr.exact.size() - 1},
                 {"radius_err_exact", num(tr.radius_err_exact)},
                 {"radius_err_classical", num(tr.radius_err_classical)}});
  j["tracks"] = a;
  return j;
}

void write_banana_csv(std::ostream& os, const std::vector<BananaSet>& sets) {
  os << "set,mean_x,kind,x,y,yaw\n";
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const BananaSet& b = sets[i];
    for (const auto* v : {&b.direct, &b.invariant}) {
      const char* kind = v == &b.direct ? "direct" : "invariant";
      for (const PlanarSample& p : *v)
        os << i << ',' << fmt(b.mean_x) << ',' << kind << ',' << fmt(p.x) << ',' << fmt(p.y)
           << ',' << fmt(p.yaw) << '\n';
    }
  }
}

nlohmann::json banana_json(const std::vector<BananaSet>& sets, const BananaConfig& cfg) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["seed"] = cfg.seed;
  j["samples"] = cfg.samples;
  j["yaw_std_deg"] = cfg.yaw_std_deg;
  j["x_std"] = cfg.x_std;
  j["y_std"] = cfg.y_std;
  nlohmann::json a = nlohmann::json::array();
  for (const BananaSet& b : sets)
    a.push_back({{"mean_x", b.mean_x},
                 {"bend_direct", num(b.bend_direct)},
                 {"bend_invariant", num(b.bend_invariant)}});
  j["sets"] = a;
  return j;
}

void write_fig6_cloud_csv(std::ostream& os, const Fig6Result& r) {
  os << "run,x,y\n";
  for (std::size_t i = 0; i < r.endpoints.size(); ++i)
    os << i << ',' << fmt(r.endpoints[i](0)) << ',' << fmt(r.endpoints[i](1)) << '\n';
}

void write_fig6_contours_csv(std::ostream& os, const Fig6Result& r) {
  os << "circle,theta,x,y\n";
  for (const ContourPoint& c : r.contours)
    os << c.circle << ',' << fmt(c.theta) << ',' << fmt(c.x) << ',' << fmt(c.y) << '\n';
}

void write_fig6_ellipse_csv(std::ostream& os, const Fig6Result& r) {
  os << "k,x,y\n";
  for (std::size_t i = 0; i < r.ellipse.size(); ++i)
    os << i << ',' << fmt(r.ellipse[i](0)) << ',' << fmt(r.ellipse[i](1)) << '\n';
}

nlohmann::json fig6_json(const Fig6Result& r, const Fig6Config& cfg) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["dt"] = cfg.dt;
  j["steps"] = cfg.steps;
  j["runs"] = cfg.runs;
  j["seed"] = cfg.seed;
  j["yaw_rate_std_deg"] = cfg.yaw_rate_std_deg;
  j["rel_frobenius"] = num(r.rel_frobenius);
  j["propagated"] = matrix_json(r.propagated);
  j["sample"] = matrix_json(r.sample);
  j["mean_position"] = nums({r.mean_pose.pos(0), r.mean_pose.pos(1), r.mean_pose.pos(2)});
  j["endpoint_mean"] = nums({r.endpoint_mean(0), r.endpoint_mean(1)});
  return j;
}

void write_mc_quantiles_csv(std::ostream& os, const McSummary& s) {
  os << "t";
  for (const char* m : {"att", "vel", "pos"})
    for (const char* q : {"p05", "p50", "p95"}) os << ",err_" << m << '_' << q;
  os << ",mean_nees\n";
  for (std::size_t k = 0; k < s.t.size(); ++k) {
    os << fmt(s.t[k]);
    for (const auto* v : {&s.att, &s.vel, &s.pos}) {
      const Quantiles& q = (*v)[k];
      os << ',' << fmt(q.p05) << ',' << fmt(q.p50) << ',' << fmt(q.p95);
    }
    os << ',' << fmt(s.mean_nees[k]) << '\n';
  }
}

void write_mc_runs_csv(std::ostream& os, const McSummary& s) {
  os << "run,seed,aborted,final_att_rad\n";
  for (std::size_t r = 0; r < s.final_att.size(); ++r) {
    const bool ab = std::isnan(s.final_att[r]);
    os << r << ',' << s.base_seed + r << ',' << (ab ? 1 : 0) << ',' << fmt(s.final_att[r]) << '\n';
  }
}

void write_json(std::ostream& os, const nlohmann::json& j) { os << j.dump(2) << '\n'; }

}  // namespace ains
