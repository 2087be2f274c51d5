#include "stirap/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "parallel.hpp"
#include "stirap/eigensolver.hpp"
#include "stirap/errors.hpp"

namespace stirap {

namespace {

Check make_check(std::string name, double residual, double tolerance) {
  return Check{std::move(name), residual, tolerance, residual < tolerance, {}};
}

Check failed_check(std::string name, double tolerance, std::string error) {
  return Check{std::move(name), std::nan(""), tolerance, false, std::move(error)};
}

double max_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

IntegratorSettings single_threaded(IntegratorSettings s) {
  s.threads = 1;
  return s;
}

// Uniform in [lo, hi) from the top 53 bits; fixed across standard libraries.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

struct MirrorResiduals {
  std::vector<double> complex_residual;
  std::vector<double> population_residual;
};

MirrorResiduals mirror_residuals(const ComplexMatrix& u) {
  const auto n = u.rows();
  MirrorResiduals r;
  for (Eigen::Index j = 0; j <= (n - 1) / 2; ++j) {
    const Complex a = u(j, j);
    const Complex b = u(n - 1 - j, n - 1 - j);
    r.complex_residual.push_back(std::abs(a - b));
    r.population_residual.push_back(std::abs(std::norm(a) - std::norm(b)));
  }
  return r;
}

std::vector<double> sorted_eigenvalues(const ChainConfig& config, double t) {
  const EigenSystem es = eigen_frame(hamiltonian_at(config, t));
  std::vector<double> v(es.values.data(), es.values.data() + es.values.size());
  std::sort(v.begin(), v.end());
  return v;
}

double eigenvalue_parity(const ChainConfig& config, const std::vector<double>& grid) {
  double worst = 0.0;
  const std::size_t m = grid.size();
  for (std::size_t i = 0; i < (m + 1) / 2; ++i) {
    const auto a = sorted_eigenvalues(config, grid[i]);
    const auto b = sorted_eigenvalues(config, grid[m - 1 - i]);
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(a[j] - b[j]));
  }
  return worst;
}

// max |A(-t)_jk + s_j s_k A(t)_jk| over the interior grid.
double coupling_parity(std::span<const AdiabaticFrame> frames, std::span<const CaseLabel> labels) {
  double worst = 0.0;
  const std::size_t m = frames.size();
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const ComplexMatrix a = nonadiabatic_matrix(frames, i);
    const ComplexMatrix b = nonadiabatic_matrix(frames, m - 1 - i);
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
      for (Eigen::Index k = 0; k < a.cols(); ++k) {
        const double parity = -static_cast<double>(labels[j].mirror_sign * labels[k].mirror_sign);
        worst = std::max(worst, std::abs(b(j, k) - parity * a(j, k)));
      }
    }
  }
  return worst;
}

}  // namespace

nlohmann::json to_json(const Check& check) {
  nlohmann::json j{{"check_name", check.name},
                   {"residual", std::isnan(check.residual) ? nlohmann::json(nullptr)
                                                           : nlohmann::json(check.residual)},
                   {"tolerance", check.tolerance},
                   {"pass", check.pass}};
  if (!check.error.empty()) j["error"] = check.error;
  return j;
}

nlohmann::json settings_to_json(const IntegratorSettings& s) {
  nlohmann::json j{{"rel_tol", s.rel_tol},
                   {"abs_tol", s.abs_tol},
                   {"max_step", s.max_step},
                   {"method", s.method == IntegrationMethod::adaptive_rk ? "adaptive_rk"
                                                                          : "piecewise_expm"},
                   {"threads", s.threads}};
  j["t_span_factor"] = s.t_span_factor ? nlohmann::json(*s.t_span_factor) : nlohmann::json(nullptr);
  if (s.method == IntegrationMethod::piecewise_expm) j["piecewise_steps"] = s.piecewise_steps;
  return j;
}

double InvarianceReport::max_complex_residual() const { return max_of(complex_residual); }

double InvarianceReport::max_population_residual() const { return max_of(population_residual); }

std::vector<Check> InvarianceReport::checks() const {
  return {
      make_check("mirror_complex", max_complex_residual(), tolerances.residual),
      make_check("mirror_population", max_population_residual(), tolerances.residual),
      make_check("swap_complex", max_of(swap_complex_residual), tolerances.residual),
      make_check("swap_population", max_of(swap_population_residual), tolerances.residual),
      make_check("form_equivalence", form_difference, tolerances.form_equivalence),
      make_check("unitarity", unitarity, tolerances.unitarity),
  };
}

bool InvarianceReport::pass() const {
  const auto all = checks();
  return std::all_of(all.begin(), all.end(), [](const Check& c) { return c.pass; });
}

InvarianceReport pulse_order_invariance_check(const ChainConfig& config,
                                              const IntegratorSettings& settings,
                                              const InvarianceTolerances& tolerances) {
  const ChainConfig cfg = validate_config(config);
  const TransitionMatrix u = transition_matrix(cfg, settings);
  const TransitionMatrix us = transition_matrix(swap_pulses(cfg), settings);

  InvarianceReport r;
  r.tolerances = tolerances;
  r.fingerprint = config_fingerprint(cfg);
  auto mirror = mirror_residuals(u.entries);
  r.complex_residual = std::move(mirror.complex_residual);
  r.population_residual = std::move(mirror.population_residual);

  const auto n = u.entries.rows();
  for (Eigen::Index j = 0; j <= (n - 1) / 2; ++j) {
    const Complex a = u.entries(j, j);
    const Complex b = us.entries(j, j);
    r.swap_complex_residual.push_back(std::abs(a - b));
    r.swap_population_residual.push_back(std::abs(std::norm(a) - std::norm(b)));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    r.form_difference =
        std::max(r.form_difference, std::abs(us.entries(j, j) - u.entries(n - 1 - j, n - 1 - j)));
  }
  r.unitarity = std::max(u.unitarity_residual(), us.unitarity_residual());
  r.population_error_estimate =
      std::max(u.population_error_estimate(), us.population_error_estimate());
  return r;
}

std::vector<double> uniform_delays(double lo, double hi, std::size_t points) {
  if (points == 0) throw ConfigError("a delay scan needs at least one point");
  if (hi < lo) throw ConfigError("tau-max must not be below tau-min");
  if (points == 1) {
    if (lo != hi) throw ConfigError("a single-point scan needs tau-min == tau-max");
    return {lo};
  }
  std::vector<double> taus(points);
  const double span = hi - lo;
  const double den = static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    // Symmetric ranges give exactly mirrored delays.
    taus[i] = 0.5 * (lo + hi) + 0.5 * span * (2.0 * static_cast<double>(i) - den) / den;
  }
  return taus;
}

ScanResult delay_scan(const ChainConfig& config, const std::vector<double>& taus,
                      const IntegratorSettings& settings) {
  settings.validate();
  const ChainConfig base = validate_config(config);
  ScanResult out;
  out.fingerprint = config_fingerprint(base);
  out.settings = settings;
  out.rows.resize(taus.size());
  const IntegratorSettings inner = single_threaded(settings);
  const StateVector c0 = basis_state(static_cast<std::size_t>(base.num_states), 0);

  detail::parallel_for(taus.size(), settings.threads, [&](std::size_t i) {
    const ChainConfig cfg = with_delay(base, taus[i] * base.pulse.width);
    const PropagationResult res = propagate_state(cfg, c0, inner);
    ScanRow& row = out.rows[i];
    row.tau = taus[i];
    row.populations = res.state.cwiseAbs2();
    row.population_error_estimate = 2.0 * res.error_estimate + res.error_estimate * res.error_estimate;
  });
  return out;
}

void write_scan_csv(const ScanResult& result, std::ostream& out) {
  if (result.rows.empty()) throw std::invalid_argument("empty scan result");
  const auto n = result.rows.front().populations.size();
  out << "tau_over_T";
  for (Eigen::Index j = 1; j <= n; ++j) out << ",P" << j;
  out << '\n';
  const auto old_precision = out.precision(12);
  for (const auto& row : result.rows) {
    out << row.tau;
    for (Eigen::Index j = 0; j < n; ++j) out << ',' << row.populations(j);
    out << '\n';
  }
  out.precision(old_precision);
}

void write_scan_csv(const ScanResult& result, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw ConfigError("cannot write " + path);
  write_scan_csv(result, file);
  if (!file) throw ConfigError("failed writing " + path);
}

ScanResult read_scan_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("tau_over_T", 0) != 0) {
    throw ConfigError("scan CSV must start with a tau_over_T header");
  }
  const auto columns = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  ScanResult out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("bad number in scan CSV: " + cell);
      }
    }
    if (static_cast<Eigen::Index>(values.size()) != columns + 1) {
      throw ConfigError("scan CSV row has the wrong number of columns");
    }
    ScanRow row;
    row.tau = values[0];
    row.populations = Eigen::Map<const Eigen::VectorXd>(values.data() + 1, columns);
    out.rows.push_back(std::move(row));
  }
  return out;
}

const Check& SymmetryReport::check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no check named " + name);
}

bool SymmetryReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

SymmetryReport symmetry_suite(const ChainConfig& config, std::size_t grid_points,
                              const IntegratorSettings& settings,
                              const SymmetryTolerances& tol) {
  settings.validate();
  const ChainConfig cfg = validate_config(config);
  SymmetryReport r;
  r.fingerprint = config_fingerprint(cfg);
  const auto grid = symmetric_grid(integration_half_span(cfg, settings), grid_points);

  try {
    r.checks.push_back(make_check("eigenvalue_parity", eigenvalue_parity(cfg, grid),
                                  tol.eigenvalue_parity));
  } catch (const NumericalError& e) {
    r.checks.push_back(failed_check("eigenvalue_parity", tol.eigenvalue_parity, e.what()));
  }

  std::optional<TransitionMatrix> u;
  std::string u_error;
  try {
    u = transition_matrix(cfg, settings);
    r.checks.push_back(make_check("unitarity", u->unitarity_residual(), tol.unitarity));
  } catch (const NumericalError& e) {
    u_error = e.what();
    r.checks.push_back(failed_check("unitarity", tol.unitarity, u_error));
  }

  std::vector<AdiabaticFrame> frames;
  std::string frame_error;
  try {
    frames = track_frames(cfg, grid);
    r.labels = classify_states(frames);
  } catch (const NumericalError& e) {
    frame_error = e.what();
  }

  if (!frame_error.empty()) {
    r.checks.push_back(failed_check("eigenvector_mirror", tol.eigenvector_mirror, frame_error));
    r.checks.push_back(failed_check("coupling_parity", tol.coupling_parity, frame_error));
    r.checks.push_back(failed_check("ua_symmetry", tol.ua_symmetry, frame_error));
    r.checks.push_back(failed_check("pathway_equivalence", tol.pathway_equivalence, frame_error));
    return r;
  }

  double mirror = 0.0;
  for (const auto& l : r.labels) mirror = std::max(mirror, l.mirror_residual);
  r.checks.push_back(make_check("eigenvector_mirror", mirror, tol.eigenvector_mirror));
  r.checks.push_back(
      make_check("coupling_parity", coupling_parity(frames, r.labels), tol.coupling_parity));

  if (!u) {
    r.checks.push_back(failed_check("ua_symmetry", tol.ua_symmetry, u_error));
    r.checks.push_back(failed_check("pathway_equivalence", tol.pathway_equivalence, u_error));
    return r;
  }
  const ComplexMatrix wi = frames.front().vectors.cast<Complex>();
  const ComplexMatrix wf = frames.back().vectors.cast<Complex>();
  const ComplexMatrix ua = wf.transpose() * u->entries * wi;
  r.checks.push_back(make_check("ua_symmetry", check_ua_symmetry(ua, r.labels), tol.ua_symmetry));
  r.plain_ua_residual = check_ua_symmetry(ua, {});
  try {
    const TransitionMatrix direct = integrate_adiabatic(cfg, settings, frames);
    const ComplexMatrix back = wf * direct.entries * wi.transpose();
    r.checks.push_back(make_check("pathway_equivalence", (back - u->entries).cwiseAbs().maxCoeff(),
                                  tol.pathway_equivalence));
  } catch (const NumericalError& e) {
    r.checks.push_back(failed_check("pathway_equivalence", tol.pathway_equivalence, e.what()));
  }
  return r;
}

CampaignFailure::CampaignFailure(std::size_t index, double residual, nlohmann::json config)
    : std::runtime_error("campaign config " + std::to_string(index) + " failed with residual " +
                         std::to_string(residual) + ": " + config.dump()),
      index_(index),
      residual_(residual),
      config_(std::move(config)) {}

double CampaignSummary::max_residual() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.residual);
  return worst;
}

std::vector<ChainConfig> random_configs(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<ChainConfig> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    ChainConfig cfg;
    cfg.num_states = 3 + 2 * static_cast<int>(rng() % 3);
    const int n = cfg.num_states;
    cfg.pulse.shape = PulseShape::gaussian;
    cfg.pulse.peak_rabi = uniform(rng, 5.0, 40.0);
    cfg.pulse.delay = uniform(rng, -2.0, 2.0);
    cfg.couplings.assign(static_cast<std::size_t>(n - 1), 0.0);
    for (int j = 0; j < n / 2; ++j) {
      const double xi = uniform(rng, 0.3, 1.0);
      cfg.couplings[static_cast<std::size_t>(j)] = xi;
      cfg.couplings[static_cast<std::size_t>(n - 2 - j)] = xi;
    }
    cfg.detunings.assign(static_cast<std::size_t>(n - 2), Detuning{});
    for (int j = 0; j < (n - 1) / 2; ++j) {
      const double d = uniform(rng, -cfg.pulse.peak_rabi, cfg.pulse.peak_rabi);
      cfg.detunings[static_cast<std::size_t>(j)].constant = d;
      cfg.detunings[static_cast<std::size_t>(n - 3 - j)].constant = d;
    }
    out.push_back(validate_config(cfg));
  }
  return out;
}

CampaignSummary random_config_campaign(std::uint64_t seed, std::size_t count,
                                       const IntegratorSettings& settings, double tolerance) {
  if (count == 0) throw ConfigError("campaign count must be at least 1");
  settings.validate();
  CampaignSummary summary;
  summary.seed = seed;
  summary.tolerance = tolerance;
  auto configs = random_configs(seed, count);
  summary.entries.resize(count);
  const IntegratorSettings inner = single_threaded(settings);

  detail::parallel_for(count, settings.threads, [&](std::size_t i) {
    const TransitionMatrix u = transition_matrix(configs[i], inner);
    const auto m = mirror_residuals(u.entries);
    CampaignEntry& e = summary.entries[i];
    e.config = configs[i];
    e.residual = max_of(m.complex_residual);
    e.population_residual = max_of(m.population_residual);
    e.unitarity = u.unitarity_residual();
  });

  for (std::size_t i = 0; i < count; ++i) {
    const auto& e = summary.entries[i];
    if (!(e.residual < tolerance)) throw CampaignFailure(i, e.residual, config_to_json(e.config));
  }
  return summary;
}

nlohmann::json to_json(const InvarianceReport& r) {
  auto checks = nlohmann::json::array();
  for (const auto& c : r.checks()) checks.push_back(to_json(c));
  nlohmann::json per_state = nlohmann::json::array();
  for (std::size_t j = 0; j < r.complex_residual.size(); ++j) {
    per_state.push_back({{"j", j + 1},
                         {"complex", r.complex_residual[j]},
                         {"population", r.population_residual[j]},
                         {"swap_complex", r.swap_complex_residual[j]},
                         {"swap_population", r.swap_population_residual[j]}});
  }
  return {{"suite", "invariance"},
          {"fingerprint", r.fingerprint},
          {"checks", checks},
          {"per_state", per_state},
          {"population_error_estimate", r.population_error_estimate},
          {"tolerances",
           {{"residual", r.tolerances.residual},
            {"form_equivalence", r.tolerances.form_equivalence},
            {"unitarity", r.tolerances.unitarity}}},
          {"pass", r.pass()}};
}

nlohmann::json to_json(const SymmetryReport& r) {
  auto checks = nlohmann::json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  auto labels = nlohmann::json::array();
  for (std::size_t j = 0; j < r.labels.size(); ++j) {
    const auto& l = r.labels[j];
    labels.push_back({{"state", j + 1},
                      {"case", l.kind == CaseKind::case_II ? "II" : "I"},
                      {"mirror_sign", l.mirror_sign},
                      {"middle_component", l.middle_evidence},
                      {"mirror_residual", l.mirror_residual}});
  }
  nlohmann::json j{{"suite", "symmetry"},
                   {"fingerprint", r.fingerprint},
                   {"checks", checks},
                   {"labels", labels},
                   {"pass", r.pass()}};
  if (r.plain_ua_residual) j["ua_transpose_residual_unsigned"] = *r.plain_ua_residual;
  return j;
}

nlohmann::json to_json(const CampaignSummary& s) {
  auto entries = nlohmann::json::array();
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    const auto& e = s.entries[i];
    entries.push_back({{"index", i},
                       {"fingerprint", config_fingerprint(e.config)},
                       {"n_states", e.config.num_states},
                       {"residual", e.residual},
                       {"population_residual", e.population_residual},
                       {"unitarity", e.unitarity}});
  }
  auto checks = nlohmann::json::array();
  checks.push_back(to_json(make_check("campaign_max_residual", s.max_residual(), s.tolerance)));
  return {{"suite", "campaign"},
          {"seed", s.seed},
          {"count", s.entries.size()},
          {"checks", checks},
          {"entries", entries},
          {"pass", s.max_residual() < s.tolerance}};
}

}  // namespace stirap
