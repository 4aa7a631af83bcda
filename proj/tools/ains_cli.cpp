#include "ains/config.hpp"
#include "ains/io.hpp"
#include "ains/preintegration.hpp"
#include "ains/simkit.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace ains;

namespace {

struct Options {
  std::string config;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<int> jobs;
  std::string out = "out";
  std::string filter;
  std::string observer = "se53";
  std::string case_name;
};

// Exit 2 paths.
struct AbortedRun : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Config resolve(const Options& o, const char* default_scenario) {
  if (!o.config.empty() && !o.scenario.empty())
    throw ConfigError("--config and --scenario are mutually exclusive");
  Config c = !o.config.empty() ? load_config(o.config)
                               : preset_config(o.scenario.empty() ? default_scenario : o.scenario);
  if (o.seed) {
    c.scenario.seed = *o.seed;
    c.banana.seed = *o.seed;
    c.fig6.seed = *o.seed;
  }
  if (o.runs) {
    if (*o.runs < 1) throw ConfigError("--runs must be >= 1");
    c.runs = *o.runs;
    c.fig6.runs = *o.runs;
  }
  if (o.jobs) {
    if (*o.jobs < 1) throw ConfigError("--jobs must be >= 1");
    c.jobs = *o.jobs;
  }
  if (!o.filter.empty()) {
    const auto f = filter_kind_from_string(o.filter);
    if (!f) throw ConfigError("--filter must be invekf|invekf_ext|mekf|se53|sync");
    c.filter = *f;
  }
  return c;
}

std::ofstream open_out(const Options& o, const std::string& name) {
  fs::create_directories(o.out);
  const fs::path p = fs::path(o.out) / name;
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::invalid_argument("cannot write " + p.string());
  return os;
}

template <class F>
void write_file(const Options& o, const std::string& name, F&& body) {
  std::ofstream os = open_out(o, name);
  body(os);
  std::printf("wrote %s\n", (fs::path(o.out) / name).string().c_str());
}

void emit_json(const Options& o, const std::string& name, const nlohmann::json& j) {
  write_file(o, name, [&](std::ostream& os) { write_json(os, j); });
}

void emit_inputs(const Options& o, const Scenario& sc) {
  const TruthStream truth = generate_truth(sc);
  const NoisyImu imu = scenario_imu(sc, truth);
  std::vector<AidingMeasurement> meas;
  for (const auto& m : generate_measurements(sc, truth, sc.seed)) meas.push_back(m.meas);
  write_file(o, "imu.csv", [&](std::ostream& os) { write_imu_csv(os, imu.samples); });
  write_file(o, "measurements.csv", [&](std::ostream& os) { write_measurement_csv(os, meas); });
}

void emit_run(const Options& o, const RunRecord& rec) {
  write_file(o, "run.csv", [&](std::ostream& os) { write_run_csv(os, rec); });
  emit_json(o, "summary.json", run_summary_json(rec));
  if (rec.aborted) throw AbortedRun(rec.failure);
}

// ---------------------------------------------------------------- subcommands

void cmd_propagate(const Options& o) {
  const Config c = resolve(o, "fig3");
  if (c.scenario.name == "fig3") {
    std::vector<Fig3Track> tracks;
    for (double dt : c.fig3_dts) tracks.push_back(fig3_track(dt));
    write_file(o, "fig3_tracks.csv", [&](std::ostream& os) { write_fig3_csv(os, tracks); });
    emit_json(o, "fig3_summary.json", fig3_json(tracks));
    return;
  }
  // Dead reckoning of the scenario's noisy IMU with covariance.
  const Scenario& sc = c.scenario;
  validate(sc);
  const TruthStream truth = generate_truth(sc);
  const NoisyImu imu = scenario_imu(sc, truth);
  NavBelief b;
  b.pose = truth.states[0];
  b.cov = Mat9::Zero();
  write_file(o, "imu.csv", [&](std::ostream& os) { write_imu_csv(os, imu.samples); });
  write_file(o, "propagate.csv", [&](std::ostream& os) {
    os << "t,true_px,true_py,true_pz,est_px,est_py,est_pz,sig_att,sig_vel,sig_pos\n";
    const long n = sc.steps();
    for (long k = 0; k <= n; ++k) {
      if (k % sc.record_every == 0 || k == n) {
        const ExtendedPose& x = truth.states[static_cast<std::size_t>(k)];
        os << fmt(static_cast<double>(k) * sc.dt());
        for (int i = 0; i < 3; ++i) os << ',' << fmt(x.pos(i));
        for (int i = 0; i < 3; ++i) os << ',' << fmt(b.pose.pos(i));
        for (int blk = 0; blk < 3; ++blk)
          os << ',' << fmt(std::sqrt(b.cov.block<3, 3>(3 * blk, 3 * blk).trace()));
        os << '\n';
      }
      if (k == n) break;
      b = propagate(b, imu.samples[static_cast<std::size_t>(k)], sc.noise, sc.dt());
    }
  });
}

void cmd_preintegrate(const Options& o) {
  const Config c = resolve(o, "ex5-gpsmag");
  const Scenario& sc = c.scenario;
  validate(sc);
  if (!(c.preintegrate.window > 0.0)) throw ConfigError("key 'preintegrate.window' must be > 0");
  const TruthStream truth = generate_truth(sc);
  const NoisyImu imu = scenario_imu(sc, truth);
  const long per = std::max(1L, std::lround(c.preintegrate.window / sc.dt()));
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["scenario"] = sc.name;
  j["seed"] = sc.seed;
  j["window_steps"] = per;
  nlohmann::json deltas = nlohmann::json::array();
  for (std::size_t at = 0; at < imu.samples.size(); at += static_cast<std::size_t>(per)) {
    const std::size_t end = std::min(imu.samples.size(), at + static_cast<std::size_t>(per));
    const std::vector<ImuSample> win(imu.samples.begin() + static_cast<long>(at),
                                     imu.samples.begin() + static_cast<long>(end));
    nlohmann::json d = delta_json(preintegrate(win, BiasState{}, sc.noise, sc.dt(),
                                               c.preintegrate.with_bias));
    d.erase("version");
    d["t0"] = static_cast<double>(at) * sc.dt();
    deltas.push_back(d);
  }
  j["deltas"] = deltas;
  write_file(o, "imu.csv", [&](std::ostream& os) { write_imu_csv(os, imu.samples); });
  emit_json(o, "preintegrate.json", j);
}

void cmd_filter(const Options& o) {
  const Config c = resolve(o, "ex5-gpsmag");
  emit_inputs(o, c.scenario);
  emit_run(o, run_filter(c.scenario, c.filter));
}

void cmd_observe(const Options& o) {
  const Config c = resolve(o, "ex5-gps");
  const auto f = filter_kind_from_string(o.observer);
  if (!f || (*f != FilterKind::Se53 && *f != FilterKind::Sync))
    throw ConfigError("--observer must be se53|sync");
  emit_inputs(o, c.scenario);
  emit_run(o, run_filter(c.scenario, *f));
}

void cmd_montecarlo(const Options& o) {
  const Config c = resolve(o, "ex5-gps");
  if (c.scenario.name == "fig6") {
    const Fig6Result r = fig6_monte_carlo(c.fig6);
    write_file(o, "fig6_cloud.csv", [&](std::ostream& os) { write_fig6_cloud_csv(os, r); });
    write_file(o, "fig6_contours.csv", [&](std::ostream& os) { write_fig6_contours_csv(os, r); });
    write_file(o, "fig6_ellipse.csv", [&](std::ostream& os) { write_fig6_ellipse_csv(os, r); });
    emit_json(o, "fig6_summary.json", fig6_json(r, c.fig6));
    return;
  }
  const McSummary s = monte_carlo(c.scenario, c.filter, c.runs, c.jobs);
  write_file(o, "mc_quantiles.csv", [&](std::ostream& os) { write_mc_quantiles_csv(os, s); });
  write_file(o, "mc_runs.csv", [&](std::ostream& os) { write_mc_runs_csv(os, s); });
  emit_json(o, "mc_summary.json", mc_summary_json(s));
}

void cmd_observability(const Options& o) {
  int horizon = kDefaultHorizon;
  if (!o.config.empty() || !o.scenario.empty()) horizon = resolve(o, "ex5-gps").horizon;
  const auto reports = scenario_reports(horizon);
  nlohmann::json j;
  if (o.case_name.empty()) {
    j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(report_json(r));
  } else {
    for (const auto& r : reports)
      if (r.name == o.case_name) j = report_json(r);
    if (j.is_null()) {
      std::string names;
      for (const auto& n : scenario_names()) names += (names.empty() ? "" : "|") + n;
      throw ConfigError("--case must be " + names);
    }
  }
  std::cout << j.dump(2) << '\n';
  emit_json(o, "observability.json", j);
}

void cmd_banana(const Options& o) {
  const Config c = resolve(o, "fig5");
  const auto sets = banana(c.banana);
  write_file(o, "banana.csv", [&](std::ostream& os) { write_banana_csv(os, sets); });
  emit_json(o, "banana.json", banana_json(sets, c.banana));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aided inertial navigation toolkit"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "TOML config file");
    sub->add_option("--scenario", o.scenario, "fig3|fig5|fig6|ex5-gps|ex5-gpsmag");
    sub->add_option("--seed", o.seed, "base seed (overrides config)");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
  };

  auto* propagate = app.add_subcommand("propagate", "exact vs classical tracks, or dead reckoning");
  common(propagate);
  auto* preint = app.add_subcommand("preintegrate", "preintegrated deltas over fixed windows");
  common(preint);
  auto* filter = app.add_subcommand("filter", "one filter run");
  common(filter);
  filter->add_option("--filter", o.filter, "invekf|invekf_ext|mekf|se53|sync");
  auto* observe = app.add_subcommand("observe", "one deterministic observer run");
  common(observe);
  observe->add_option("--observer", o.observer, "se53|sync")->capture_default_str();
  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo statistics");
  common(mc);
  mc->add_option("--filter", o.filter, "invekf|invekf_ext|mekf|se53|sync");
  mc->add_option("--runs", o.runs, "number of runs (overrides config)");
  mc->add_option("--jobs", o.jobs, "worker threads; outputs do not depend on it");
  auto* obs = app.add_subcommand("observability", "rank and null space of the canned cases");
  common(obs);
  obs->add_option("--case", o.case_name, "case name; all cases when omitted");
  auto* ban = app.add_subcommand("banana", "direct vs invariant error samples");
  common(ban);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*propagate) cmd_propagate(o);
    else if (*preint) cmd_preintegrate(o);
    else if (*filter) cmd_filter(o);
    else if (*observe) cmd_observe(o);
    else if (*mc) cmd_montecarlo(o);
    else if (*obs) cmd_observability(o);
    else if (*ban) cmd_banana(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const CsvError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error %s: %s\n", to_string(e.code()), e.what());
    return 2;
  } catch (const AbortedRun& e) {
    std::fprintf(stderr, "run aborted: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
