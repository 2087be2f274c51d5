#pragma once

// Time evolution of the chain amplitudes, i dc/dt = H(t) c (hbar = 1).
//
// The production path is an adaptive Dormand-Prince 5(4) integrator acting on
// the complex amplitudes; a piecewise-constant matrix-exponential product is
// kept as an independent oracle.

#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "stirap/chain_model.hpp"

namespace stirap {

using Complex = std::complex<double>;
using StateVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;
using HamiltonianFn = std::function<SymTridiagonal(double)>;
// dy/dt = f(t, y), written into the third argument.
using RhsFn = std::function<void(double, const StateVector&, StateVector&)>;

enum class IntegrationMethod { adaptive_rk, piecewise_expm };

struct IntegratorSettings {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  // Integration window is [-t_f, t_f] with t_f = |tau| + factor * T. When
  // unset, the pulse shape's own negligible-tail half width is used (6 T for
  // gaussians).
  std::optional<double> t_span_factor;
  double max_step = 0.1;
  IntegrationMethod method = IntegrationMethod::adaptive_rk;
  std::size_t piecewise_steps = 100000;
  unsigned threads = 1;
  bool record_trajectory = false;

  // Throws ConfigError when a field is out of range.
  void validate() const;
};

struct TrajectorySample {
  double t;
  StateVector amplitudes;
};

struct PropagationResult {
  StateVector state;
  // Sum of the absolute local error estimates over accepted steps; a
  // conservative bound on the global amplitude error.
  double error_estimate = 0.0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  double max_norm_drift = 0.0;
  std::vector<TrajectorySample> trajectory;
};

struct TransitionMatrix {
  ComplexMatrix entries;
  double error_estimate = 0.0;  // max over columns
  std::size_t steps = 0;        // total accepted steps (or product factors)

  // max |U^dagger U - I|
  double unitarity_residual() const;
  // Bound on the error of any |U_jk|^2 implied by error_estimate.
  double population_error_estimate() const {
    return 2.0 * error_estimate + error_estimate * error_estimate;
  }
};

double integration_half_span(const ChainConfig& config, const IntegratorSettings& settings);

// -i H c for a tridiagonal H.
void apply_schrodinger_rhs(const SymTridiagonal& h, const StateVector& c, StateVector& out);

/// Dormand-Prince 5(4) integration of a general complex system from t0 to t1.
/// Throws IntegrationError on step size underflow or when the Euclidean norm
/// of the state drifts by more than 100 * rel_tol.
PropagationResult integrate_dp45(const RhsFn& rhs, const StateVector& y0, double t0, double t1,
                                 const IntegratorSettings& settings);

/// Integrates i dc/dt = H(t) c from t0 to t1. Throws IntegrationError on step
/// size underflow or when the norm drifts by more than 100 * rel_tol.
PropagationResult propagate(const HamiltonianFn& hamiltonian, const StateVector& c0, double t0,
                            double t1, const IntegratorSettings& settings);

PropagationResult propagate_state(const ChainConfig& config, const StateVector& c0,
                                  const IntegratorSettings& settings);

TransitionMatrix transition_matrix(const HamiltonianFn& hamiltonian, std::size_t dim, double t0,
                                   double t1, const IntegratorSettings& settings);
TransitionMatrix transition_matrix(const ChainConfig& config, const IntegratorSettings& settings);

/// exp(-i H dt) from the full eigendecomposition of H.
ComplexMatrix expm_oracle(const SymTridiagonal& h, double dt);

/// Ordered product of expm_oracle(H(t_mid), dt) over n_steps uniform steps.
ComplexMatrix piecewise_oracle(const HamiltonianFn& hamiltonian, double t0, double t1,
                               std::size_t n_steps);
ComplexMatrix piecewise_oracle(const ChainConfig& config, std::size_t n_steps,
                               const IntegratorSettings& settings);

StateVector basis_state(std::size_t dim, std::size_t index);

// CSV columns: t_over_T, re(c_1), im(c_1), ..., norm.
void write_trajectory_csv(const std::vector<TrajectorySample>& trajectory, std::ostream& out);

}  // namespace stirap
