// stirap: delay scans, invariance/symmetry verification and adiabatic frame
// dumps for pulse-driven chain models.
//
// Exit codes: 0 success / all checks pass, 1 a check failed, 2 bad input,
// 3 numerical failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "stirap/adiabatic.hpp"
#include "stirap/chain_model.hpp"
#include "stirap/errors.hpp"
#include "stirap/experiments.hpp"
#include "stirap/propagator.hpp"

#ifndef STIRAP_VERSION
#define STIRAP_VERSION "0.0.0"
#endif

namespace {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kBadInput = 2, kNumerical = 3 };

struct GlobalOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  std::optional<double> t_span_factor;
  unsigned threads = 1;

  stirap::IntegratorSettings settings() const {
    stirap::IntegratorSettings s;
    s.rel_tol = rel_tol;
    s.abs_tol = abs_tol;
    s.t_span_factor = t_span_factor;
    s.threads = threads;
    s.validate();
    return s;
  }
};

json manifest(const std::string& subcommand, const std::optional<stirap::ChainConfig>& config,
              const stirap::IntegratorSettings& settings, const json& outputs, const json& extra) {
  json m{{"tool", "stirap"}, {"version", STIRAP_VERSION}, {"subcommand", subcommand}};
  if (config) {
    m["config"] = stirap::config_to_json(*config);
    m["config_fingerprint"] = stirap::config_fingerprint(*config);
  } else {
    m["config"] = nullptr;
  }
  m["settings"] = stirap::settings_to_json(settings);
  m["outputs"] = outputs;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  return m;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw stirap::ConfigError("cannot write " + path);
  f << text;
  if (!f) throw stirap::ConfigError("failed writing " + path);
}

void write_manifest(const std::string& out, const json& m) {
  write_text(out + ".manifest.json", m.dump(2) + "\n");
}

struct ScanArgs {
  std::string config;
  double tau_min = -3.0;
  double tau_max = 3.0;
  std::size_t points = 121;
  std::string out;
};

int run_scan(const ScanArgs& a, const GlobalOptions& g) {
  const auto settings = g.settings();
  const auto config = stirap::load_config(a.config);
  const auto taus = stirap::uniform_delays(a.tau_min, a.tau_max, a.points);
  const auto result = stirap::delay_scan(config, taus, settings);
  if (a.out.empty()) {
    stirap::write_scan_csv(result, std::cout);
    return kOk;
  }
  stirap::write_scan_csv(result, a.out);
  write_manifest(a.out, manifest("scan", config, settings, json::array({a.out}),
                                 {{"tau_min", a.tau_min},
                                  {"tau_max", a.tau_max},
                                  {"points", a.points},
                                  {"seed", nullptr}}));
  return kOk;
}

struct VerifyArgs {
  std::string config;
  std::string suite = "invariance";
  std::uint64_t seed = 1;
  std::size_t count = 50;
  std::size_t grid_points = 2001;
  std::string out;
};

int run_verify(const VerifyArgs& a, const GlobalOptions& g) {
  const auto settings = g.settings();
  std::optional<stirap::ChainConfig> config;
  json report;
  bool pass = false;
  json extra{{"suite", a.suite}, {"seed", nullptr}};

  if (a.suite == "campaign") {
    extra["seed"] = a.seed;
    extra["count"] = a.count;
    try {
      const auto summary = stirap::random_config_campaign(a.seed, a.count, settings);
      report = stirap::to_json(summary);
      pass = report["pass"].get<bool>();
    } catch (const stirap::CampaignFailure& f) {
      report = {{"suite", "campaign"},
                {"seed", a.seed},
                {"count", a.count},
                {"pass", false},
                {"failure",
                 {{"index", f.index()}, {"residual", f.residual()}, {"config", f.config()}}}};
      pass = false;
    }
  } else {
    if (a.config.empty()) throw stirap::ConfigError("--suite " + a.suite + " needs a config file");
    config = stirap::load_config(a.config);
    if (a.suite == "invariance") {
      const auto r = stirap::pulse_order_invariance_check(*config, settings);
      report = stirap::to_json(r);
      pass = r.pass();
    } else {
      extra["grid_points"] = a.grid_points;
      const auto r = stirap::symmetry_suite(*config, a.grid_points, settings);
      report = stirap::to_json(r);
      pass = r.pass();
    }
  }

  const json outputs = a.out.empty() ? json::array() : json::array({a.out});
  const json m = manifest("verify", config, settings, outputs, extra);
  report["manifest"] = m;
  if (a.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    write_text(a.out, report.dump(2) + "\n");
    write_manifest(a.out, m);
  }
  std::cerr << a.suite << ": " << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kOk : kCheckFailed;
}

struct FramesArgs {
  std::string config;
  std::size_t grid_points = 2001;
  bool with_vectors = false;
  std::string out;
};

int run_frames(const FramesArgs& a, const GlobalOptions& g) {
  const auto settings = g.settings();
  const auto config = stirap::load_config(a.config);
  const auto grid =
      stirap::symmetric_grid(stirap::integration_half_span(config, settings), a.grid_points);
  const auto frames = stirap::track_frames(config, grid);
  if (a.out.empty()) {
    stirap::write_frames_csv(frames, a.with_vectors, std::cout);
    return kOk;
  }
  {
    std::ofstream f(a.out);
    if (!f) throw stirap::ConfigError("cannot write " + a.out);
    stirap::write_frames_csv(frames, a.with_vectors, f);
    if (!f) throw stirap::ConfigError("failed writing " + a.out);
  }
  write_manifest(a.out, manifest("frames", config, settings, json::array({a.out}),
                                 {{"grid_points", a.grid_points},
                                  {"with_vectors", a.with_vectors},
                                  {"seed", nullptr}}));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulse-order invariance toolkit for chainwise-coupled N-state systems"};
  app.set_version_flag("--version", STIRAP_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--rel-tol", g.rel_tol, "Integrator relative tolerance")->capture_default_str();
  app.add_option("--abs-tol", g.abs_tol, "Integrator absolute tolerance")->capture_default_str();
  app.add_option("--t-span-factor", g.t_span_factor,
                 "Window half width beyond |tau|, in T (default: 6 for gaussian pulses)");
  app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::Range(1u, 1024u));

  ScanArgs scan;
  auto* scan_cmd = app.add_subcommand("scan", "Final populations versus pulse delay (CSV)");
  scan_cmd->add_option("config", scan.config, "Chain config (JSON)")->required();
  scan_cmd->add_option("--tau-min", scan.tau_min, "Smallest tau/T")->capture_default_str();
  scan_cmd->add_option("--tau-max", scan.tau_max, "Largest tau/T")->capture_default_str();
  scan_cmd->add_option("--points", scan.points, "Number of delays")->capture_default_str();
  scan_cmd->add_option("--out", scan.out, "Output CSV (default: stdout)");

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Run a verification suite (JSON report)");
  verify_cmd->add_option("config", verify.config, "Chain config (JSON); unused by campaign");
  verify_cmd->add_option("--suite", verify.suite, "Suite to run")
      ->capture_default_str()
      ->check(CLI::IsMember({"invariance", "symmetry", "campaign"}));
  verify_cmd->add_option("--seed", verify.seed, "Campaign seed")->capture_default_str();
  verify_cmd->add_option("--count", verify.count, "Campaign size")->capture_default_str();
  verify_cmd->add_option("--grid-points", verify.grid_points, "Symmetry suite grid")->capture_default_str();
  verify_cmd->add_option("--out", verify.out, "Output JSON (default: stdout)");

  FramesArgs frames;
  auto* frames_cmd = app.add_subcommand("frames", "Tracked adiabatic eigenvalues/eigenvectors (CSV)");
  frames_cmd->add_option("config", frames.config, "Chain config (JSON)")->required();
  frames_cmd->add_option("--grid-points", frames.grid_points, "Grid size")->capture_default_str();
  frames_cmd->add_flag("--with-vectors", frames.with_vectors, "Include eigenvector components");
  frames_cmd->add_option("--out", frames.out, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*scan_cmd) return run_scan(scan, g);
    if (*verify_cmd) return run_verify(verify, g);
    return run_frames(frames, g);
  } catch (const stirap::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const stirap::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
}
