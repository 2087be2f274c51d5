#pragma once

// Runnable experiments on top of the propagator and the adiabatic frame: the
// pulse-order invariance check, the delay scan, the symmetry-residual suite
// and a seeded random-configuration campaign.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "stirap/adiabatic.hpp"
#include "stirap/chain_model.hpp"
#include "stirap/propagator.hpp"

namespace stirap {

struct Check {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  // Set when the check could not be evaluated; such a check never passes.
  std::string error;
};

nlohmann::json to_json(const Check& check);
nlohmann::json settings_to_json(const IntegratorSettings& settings);

struct InvarianceTolerances {
  double residual = 1e-6;
  double form_equivalence = 1e-8;
  double unitarity = 1e-9;
};

/// Residuals of U_jj = U_{N+1-j,N+1-j} for j = 1..n+1 (N = 2n+1), in two forms:
/// mirror (within one U) and swap (U of the config against U of the config
/// with the pulse order exchanged).
struct InvarianceReport {
  std::vector<double> complex_residual;
  std::vector<double> population_residual;
  std::vector<double> swap_complex_residual;
  std::vector<double> swap_population_residual;
  // max_j |U^swap_jj - U_{N+1-j,N+1-j}|
  double form_difference = 0.0;
  double unitarity = 0.0;
  double population_error_estimate = 0.0;
  std::string fingerprint;
  InvarianceTolerances tolerances;

  double max_complex_residual() const;
  double max_population_residual() const;
  std::vector<Check> checks() const;
  bool pass() const;
};

InvarianceReport pulse_order_invariance_check(const ChainConfig& config,
                                              const IntegratorSettings& settings,
                                              const InvarianceTolerances& tolerances = {});

struct ScanRow {
  double tau = 0.0;
  Eigen::VectorXd populations;
  double population_error_estimate = 0.0;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  std::string fingerprint;
  IntegratorSettings settings;
};

/// Final populations from c(-t_f) = psi_1 at each delay; rows follow `taus`.
/// Points run on settings.threads workers.
ScanResult delay_scan(const ChainConfig& config, const std::vector<double>& taus,
                      const IntegratorSettings& settings);

// `points` uniform delays in [lo, hi]; points == 1 requires lo == hi.
std::vector<double> uniform_delays(double lo, double hi, std::size_t points);

void write_scan_csv(const ScanResult& result, std::ostream& out);
void write_scan_csv(const ScanResult& result, const std::string& path);
// Rows only; fingerprint and settings are not part of the CSV.
ScanResult read_scan_csv(std::istream& in);

struct SymmetryTolerances {
  double eigenvalue_parity = 1e-10;
  double eigenvector_mirror = 1e-8;
  double coupling_parity = 1e-8;
  double ua_symmetry = 1e-6;
  double pathway_equivalence = 1e-6;
  double unitarity = 1e-9;
};

struct SymmetryReport {
  std::vector<Check> checks;
  std::vector<CaseLabel> labels;  // empty when classification failed
  // max |(U^a)^T - U^a|, the relation without sign matrix; diagnostic only.
  std::optional<double> plain_ua_residual;
  std::string fingerprint;

  const Check& check(const std::string& name) const;
  bool pass() const;
};

/// Eigenvalue parity, eigenvector mirror, coupling parity, U^a symmetry,
/// pathway equivalence and unitarity on a symmetric grid spanning the
/// integration window. A failure inside one check is recorded on that check
/// (and on the checks that depend on it); the others still run.
SymmetryReport symmetry_suite(const ChainConfig& config, std::size_t grid_points,
                              const IntegratorSettings& settings,
                              const SymmetryTolerances& tolerances = {});

struct CampaignEntry {
  ChainConfig config;
  double residual = 0.0;             // max_j |U_jj - U_{N+1-j,N+1-j}|
  double population_residual = 0.0;  // max_j ||U_jj|^2 - |U_{N+1-j,N+1-j}|^2|
  double unitarity = 0.0;
};

struct CampaignSummary {
  std::uint64_t seed = 0;
  double tolerance = 1e-6;
  std::vector<CampaignEntry> entries;

  double max_residual() const;
};

// Thrown by random_config_campaign for the first (lowest index) failing config.
class CampaignFailure : public std::runtime_error {
 public:
  CampaignFailure(std::size_t index, double residual, nlohmann::json config);
  std::size_t index() const { return index_; }
  double residual() const { return residual_; }
  const nlohmann::json& config() const { return config_; }

 private:
  std::size_t index_;
  double residual_;
  nlohmann::json config_;
};

/// Random symmetric chains: N in {3,5,7}, xi ~ U[0.3,1] and constant
/// Delta ~ U[-Omega_0, Omega_0] mirrored, tau/T ~ U[-2,2], Omega_0 T ~ U[5,40].
/// Same seed, same configs.
std::vector<ChainConfig> random_configs(std::uint64_t seed, std::size_t count);

CampaignSummary random_config_campaign(std::uint64_t seed, std::size_t count,
                                       const IntegratorSettings& settings,
                                       double tolerance = 1e-6);

nlohmann::json to_json(const InvarianceReport& report);
nlohmann::json to_json(const SymmetryReport& report);
nlohmann::json to_json(const CampaignSummary& summary);

}  // namespace stirap
