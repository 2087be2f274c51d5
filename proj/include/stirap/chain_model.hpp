#pragma once

// Chain model: pulse envelopes, detunings and the tridiagonal RWA Hamiltonian
// of an N-state chain (N odd) driven by a pump and a Stokes pulse.
//
// Link j (1-based, between states j and j+1) is driven by the pump for odd j
// and by the Stokes pulse for even j, with constant relative strength xi_j:
//
//   H = | 0      O_12   0     ...               |
//       | O_12   D_2    O_23  ...               |
//       |  ...                ...   D_{N-1} O   |
//       |                           O       0   |
//
//   pump(t)   = peak * f(t - tau)
//   stokes(t) = peak * f(t + tau)
//
// with f even and f(0) = 1. All times are in units of the pulse width T and
// all frequencies in units of 1/T.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace stirap {

enum class PulseShape { gaussian, sech, sin_squared, custom };
enum class PulseOrder { stokes_first, swapped };
enum class Pulse { pump, stokes };

std::string to_string(PulseShape shape);
PulseShape pulse_shape_from_string(const std::string& name);

// Even envelope given as samples f(0), f(dx), f(2dx), ... on x >= 0, mirrored
// to x < 0 and interpolated with a clamped cubic spline (zero slope at both
// ends). Zero beyond the last sample.
class SampledEnvelope {
 public:
  SampledEnvelope() = default;
  SampledEnvelope(std::vector<double> samples, double step);

  double value(double x) const;
  double derivative(double x) const;

  const std::vector<double>& samples() const { return samples_; }
  double step() const { return step_; }
  double extent() const { return step_ * static_cast<double>(samples_.size() - 1); }

  bool operator==(const SampledEnvelope& other) const {
    return samples_ == other.samples_ && step_ == other.step_;
  }

 private:
  std::vector<double> samples_;
  std::vector<double> second_derivs_;
  double step_ = 0.0;
};

struct PulseSpec {
  PulseShape shape = PulseShape::gaussian;
  double peak_rabi = 0.0;  // Omega_0
  double width = 1.0;      // T
  double delay = 0.0;      // tau: pump peaks at +tau, Stokes at -tau
  PulseOrder order = PulseOrder::stokes_first;
  SampledEnvelope custom;

  // Normalized envelope f(x) and f'(x).
  double envelope(double x) const;
  double envelope_derivative(double x) const;

  // Delay actually applied, accounting for a swap.
  double effective_delay() const { return order == PulseOrder::stokes_first ? delay : -delay; }

  // Half-width beyond which the envelope is negligible (< ~1e-15) or zero.
  double natural_half_span() const;

  bool operator==(const PulseSpec&) const = default;
};

// Delta_j(t) = constant + gauss_amp * exp(-t^2 / gauss_width^2); even in t.
struct Detuning {
  double constant = 0.0;
  double gauss_amp = 0.0;
  double gauss_width = 1.0;

  double value(double t) const;
  double derivative(double t) const;

  bool operator==(const Detuning&) const = default;
};

struct ChainConfig {
  int num_states = 3;
  std::vector<double> couplings;    // xi_1 .. xi_{N-1}
  std::vector<Detuning> detunings;  // Delta_2 .. Delta_{N-1}
  PulseSpec pulse;
  bool symmetry_enforced = true;

  int half() const { return (num_states - 1) / 2; }

  bool operator==(const ChainConfig&) const = default;
};

// Real symmetric tridiagonal matrix.
struct SymTridiagonal {
  std::vector<double> diagonal;
  std::vector<double> off_diagonal;

  std::size_t size() const { return diagonal.size(); }
  Eigen::MatrixXd dense() const;
  double max_abs() const;
  // Row/column reversal j -> N+1-j.
  SymTridiagonal reversed() const;

  bool operator==(const SymTridiagonal&) const = default;
};

// Checks every structural and (when requested) symmetry invariant; throws
// ConfigError describing the first violation.
ChainConfig validate_config(ChainConfig raw);

ChainConfig config_from_json(const nlohmann::json& doc);
ChainConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ChainConfig& config);
// FNV-1a hash of the canonical JSON form, as 16 hex digits.
std::string config_fingerprint(const ChainConfig& config);

double envelope_value(const PulseSpec& pulse, Pulse which, double t);
double envelope_derivative(const PulseSpec& pulse, Pulse which, double t);

SymTridiagonal hamiltonian_at(const ChainConfig& config, double t);
SymTridiagonal hamiltonian_derivative_at(const ChainConfig& config, double t);

ChainConfig swap_pulses(const ChainConfig& config);
ChainConfig mirror_indices(const ChainConfig& config);

// Config with the given delay (order flag reset to stokes_first).
ChainConfig with_delay(const ChainConfig& config, double delay);

// The five-state resonant chain of the delay-scan figure:
// xi = (sqrt(1/3), sqrt(1/2), sqrt(1/2), sqrt(1/3)), gaussian, Omega_0 T = 30.
ChainConfig five_state_reference(double delay);

}  // namespace stirap
