#include "stirap/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "parallel.hpp"
#include "stirap/eigensolver.hpp"
#include "stirap/errors.hpp"

namespace stirap {

namespace {

constexpr std::size_t kMaxSteps = 50'000'000;
// Accepted local error is this fraction of atol + rtol*|y|; keeps the
// accumulated norm drift of a full pulse window below 10*rtol.
constexpr double kLocalTolFraction = 0.01;

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double scaled_max(const StateVector& v, const StateVector& y, const StateVector& y2,
                  const IntegratorSettings& s) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double sk =
        kLocalTolFraction * (s.abs_tol + s.rel_tol * std::max(std::abs(y(i)), std::abs(y2(i))));
    acc = std::max(acc, std::abs(v(i)) / sk);
  }
  return acc;
}

double initial_step(const RhsFn& rhs, double t0, const StateVector& y0,
                    const StateVector& f0, double span, const IntegratorSettings& s) {
  const double d0 = scaled_max(y0, y0, y0, s);
  const double d1 = scaled_max(f0, y0, y0, s);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  StateVector y1 = y0 + h0 * f0;
  StateVector f1(y0.size());
  rhs(t0 + h0, y1, f1);
  const double d2 = scaled_max(f1 - f0, y0, y0, s) / h0;
  const double dm = std::max(d1, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
  return std::min({100.0 * h0, h1, s.max_step, span});
}

}  // namespace

void IntegratorSettings::validate() const {
  if (!(rel_tol > 0.0 && rel_tol <= 1e-3)) throw ConfigError("rel_tol must lie in (0, 1e-3]");
  if (!(abs_tol > 0.0 && abs_tol <= 1e-3)) throw ConfigError("abs_tol must lie in (0, 1e-3]");
  if (t_span_factor && !(*t_span_factor > 0.0)) throw ConfigError("t_span_factor must be positive");
  if (!(max_step > 0.0)) throw ConfigError("max_step must be positive");
  if (piecewise_steps < 1) throw ConfigError("piecewise_steps must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
}

double TransitionMatrix::unitarity_residual() const {
  const auto n = entries.rows();
  const ComplexMatrix g = entries.adjoint() * entries - ComplexMatrix::Identity(n, n);
  return g.cwiseAbs().maxCoeff();
}

double integration_half_span(const ChainConfig& config, const IntegratorSettings& settings) {
  const auto& p = config.pulse;
  const double factor = settings.t_span_factor.value_or(p.natural_half_span() / p.width);
  return std::abs(p.delay) + factor * p.width;
}

void apply_schrodinger_rhs(const SymTridiagonal& h, const StateVector& c, StateVector& out) {
  const auto n = static_cast<Eigen::Index>(h.size());
  out.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Complex acc = h.diagonal[i] * c(i);
    if (i > 0) acc += h.off_diagonal[i - 1] * c(i - 1);
    if (i + 1 < n) acc += h.off_diagonal[i] * c(i + 1);
    out(i) = Complex(acc.imag(), -acc.real());  // -i * acc
  }
}

PropagationResult integrate_dp45(const RhsFn& rhs, const StateVector& c0, double t0, double t1,
                                 const IntegratorSettings& settings) {
  settings.validate();
  PropagationResult res;
  res.state = c0;
  if (settings.record_trajectory) res.trajectory.push_back({t0, c0});
  if (t0 == t1) return res;

  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double norm0 = c0.norm();
  const auto n = c0.size();

  StateVector y = c0, ynew(n), err(n), tmp(n);
  StateVector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  double t = t0;
  rhs(t, y, k1);
  double h = initial_step(rhs, t0, y, k1, span, settings);
  bool last_rejected = false;

  while (dir * (t1 - t) > 0.0) {
    if (res.accepted_steps + res.rejected_steps > kMaxSteps) {
      throw IntegrationError("step budget exhausted at t=" + std::to_string(t));
    }
    const double remaining = std::abs(t1 - t);
    if (h >= remaining) h = remaining;
    const double hs = dir * h;

    tmp = y + hs * (a21 * k1);
    rhs(t + c2 * hs, tmp, k2);
    tmp = y + hs * (a31 * k1 + a32 * k2);
    rhs(t + c3 * hs, tmp, k3);
    tmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * hs, tmp, k4);
    tmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * hs, tmp, k5);
    tmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    const double t_next = (h == remaining) ? t1 : t + hs;
    rhs(t_next, tmp, k6);
    ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    rhs(t_next, ynew, k7);
    err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double err_norm = scaled_max(err, y, ynew, settings);
    if (err_norm <= 1.0) {
      t = t_next;
      y = ynew;
      k1 = k7;
      ++res.accepted_steps;
      res.error_estimate += err.cwiseAbs().maxCoeff();
      const double drift = std::abs(y.norm() - norm0) / std::max(norm0, 1e-300);
      res.max_norm_drift = std::max(res.max_norm_drift, drift);
      if (drift > 100.0 * settings.rel_tol) {
        std::ostringstream os;
        os << "norm drift " << drift << " exceeds 100*rel_tol at t=" << t;
        throw IntegrationError(os.str());
      }
      if (settings.record_trajectory) res.trajectory.push_back({t, y});
      double fac = err_norm == 0.0 ? 5.0 : 0.9 * std::pow(err_norm, -0.2);
      fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
      h *= fac;
      last_rejected = false;
    } else {
      ++res.rejected_steps;
      h *= std::max(0.2, 0.9 * std::pow(err_norm, -0.2));
      last_rejected = true;
    }
    h = std::min(h, settings.max_step);
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), span)) {
      throw IntegrationError("step size underflow at t=" + std::to_string(t));
    }
  }
  res.state = y;
  return res;
}

PropagationResult propagate(const HamiltonianFn& hamiltonian, const StateVector& c0, double t0,
                            double t1, const IntegratorSettings& settings) {
  auto rhs = [&hamiltonian](double t, const StateVector& y, StateVector& dy) {
    apply_schrodinger_rhs(hamiltonian(t), y, dy);
  };
  return integrate_dp45(rhs, c0, t0, t1, settings);
}

PropagationResult propagate_state(const ChainConfig& config, const StateVector& c0,
                                  const IntegratorSettings& settings) {
  settings.validate();
  if (c0.size() != config.num_states) throw ConfigError("initial state has wrong dimension");
  if (std::abs(c0.norm() - 1.0) > 1e-12) throw ConfigError("initial state must be normalized");
  const double tf = integration_half_span(config, settings);
  if (settings.method == IntegrationMethod::piecewise_expm) {
    PropagationResult res;
    res.state = piecewise_oracle(config, settings.piecewise_steps, settings) * c0;
    res.accepted_steps = settings.piecewise_steps;
    return res;
  }
  auto h = [&config](double t) { return hamiltonian_at(config, t); };
  return propagate(h, c0, -tf, tf, settings);
}

TransitionMatrix transition_matrix(const HamiltonianFn& hamiltonian, std::size_t dim, double t0,
                                   double t1, const IntegratorSettings& settings) {
  settings.validate();
  TransitionMatrix out;
  const auto n = static_cast<Eigen::Index>(dim);
  if (settings.method == IntegrationMethod::piecewise_expm) {
    out.entries = piecewise_oracle(hamiltonian, t0, t1, settings.piecewise_steps);
    out.steps = settings.piecewise_steps;
    return out;
  }
  IntegratorSettings column_settings = settings;
  column_settings.record_trajectory = false;
  std::vector<PropagationResult> columns(dim);
  detail::parallel_for(dim, settings.threads, [&](std::size_t k) {
    columns[k] = propagate(hamiltonian, basis_state(dim, k), t0, t1, column_settings);
  });
  out.entries.resize(n, n);
  for (std::size_t k = 0; k < dim; ++k) {
    out.entries.col(static_cast<Eigen::Index>(k)) = columns[k].state;
    out.error_estimate = std::max(out.error_estimate, columns[k].error_estimate);
    out.steps += columns[k].accepted_steps;
  }
  return out;
}

TransitionMatrix transition_matrix(const ChainConfig& config, const IntegratorSettings& settings) {
  const double tf = integration_half_span(config, settings);
  auto h = [&config](double t) { return hamiltonian_at(config, t); };
  return transition_matrix(h, static_cast<std::size_t>(config.num_states), -tf, tf, settings);
}

ComplexMatrix expm_oracle(const SymTridiagonal& h, double dt) {
  const EigenSystem es = eigen_frame(h);
  const auto n = es.values.size();
  Eigen::VectorXcd phases(n);
  for (Eigen::Index j = 0; j < n; ++j) phases(j) = std::polar(1.0, -es.values(j) * dt);
  const ComplexMatrix w = es.vectors.cast<Complex>();
  return w * phases.asDiagonal() * w.transpose();
}

ComplexMatrix piecewise_oracle(const HamiltonianFn& hamiltonian, double t0, double t1,
                               std::size_t n_steps) {
  if (n_steps < 1) throw ConfigError("piecewise oracle needs at least one step");
  const double dt = (t1 - t0) / static_cast<double>(n_steps);
  ComplexMatrix u;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t_mid = t0 + (static_cast<double>(k) + 0.5) * dt;
    ComplexMatrix step = expm_oracle(hamiltonian(t_mid), dt);
    if (k == 0) {
      u = std::move(step);
    } else {
      u = step * u;
    }
  }
  return u;
}

ComplexMatrix piecewise_oracle(const ChainConfig& config, std::size_t n_steps,
                               const IntegratorSettings& settings) {
  const double tf = integration_half_span(config, settings);
  auto h = [&config](double t) { return hamiltonian_at(config, t); };
  return piecewise_oracle(h, -tf, tf, n_steps);
}

StateVector basis_state(std::size_t dim, std::size_t index) {
  StateVector v = StateVector::Zero(static_cast<Eigen::Index>(dim));
  v(static_cast<Eigen::Index>(index)) = 1.0;
  return v;
}

void write_trajectory_csv(const std::vector<TrajectorySample>& trajectory, std::ostream& out) {
  if (trajectory.empty()) return;
  const auto n = trajectory.front().amplitudes.size();
  out << "t_over_T";
  for (Eigen::Index j = 1; j <= n; ++j) out << ",re(c_" << j << "),im(c_" << j << ")";
  out << ",norm\n";
  const auto old_precision = out.precision(12);
  for (const auto& s : trajectory) {
    out << s.t;
    for (Eigen::Index j = 0; j < n; ++j) out << ',' << s.amplitudes(j).real() << ',' << s.amplitudes(j).imag();
    out << ',' << s.amplitudes.norm() << '\n';
  }
  out.precision(old_precision);
}

}  // namespace stirap
