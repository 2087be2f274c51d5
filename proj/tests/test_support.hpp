#pragma once

// Independent reference implementations used only by the tests: a cyclic
// Jacobi eigensolver on dense matrices and a fixed-step classical RK4
// propagator. Neither shares code with the library's QL solver or DP5(4).

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stirap/chain_model.hpp"
#include "stirap/propagator.hpp"

namespace stirap::fixtures {

struct DenseEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns
};

inline DenseEigen jacobi_eigen(Eigen::MatrixXd a, double tol = 1e-15) {
  const auto n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * std::max(1.0, a.norm())) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) < a(y, y); });
  DenseEigen out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    out.values(j) = a(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(j)]);
    out.vectors.col(j) = v.col(order[static_cast<std::size_t>(j)]);
  }
  return out;
}

// Classical RK4 on i dU/dt = H U with a dense H, fixed step.
inline ComplexMatrix rk4_transition(const std::function<Eigen::MatrixXd(double)>& h, Eigen::Index n,
                                    double t0, double t1, std::size_t steps) {
  const std::complex<double> mi(0.0, -1.0);
  ComplexMatrix u = ComplexMatrix::Identity(n, n);
  const double dt = (t1 - t0) / static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = t0 + dt * static_cast<double>(k);
    const ComplexMatrix h0 = h(t).cast<std::complex<double>>();
    const ComplexMatrix hm = h(t + 0.5 * dt).cast<std::complex<double>>();
    const ComplexMatrix h1 = h(t + dt).cast<std::complex<double>>();
    const ComplexMatrix k1 = mi * h0 * u;
    const ComplexMatrix k2 = mi * hm * (u + 0.5 * dt * k1);
    const ComplexMatrix k3 = mi * hm * (u + 0.5 * dt * k2);
    const ComplexMatrix k4 = mi * h1 * (u + dt * k3);
    u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return u;
}

inline SymTridiagonal random_tridiagonal(std::mt19937_64& rng, std::size_t n, double scale = 10.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  SymTridiagonal h;
  h.diagonal.resize(n);
  h.off_diagonal.resize(n - 1);
  for (auto& d : h.diagonal) d = dist(rng);
  for (auto& e : h.off_diagonal) e = dist(rng);
  return h;
}

inline ChainConfig three_state_resonant(double delay = 1.0) {
  ChainConfig c;
  c.num_states = 3;
  c.couplings = {1.0, 1.0};
  c.detunings = {Detuning{}};
  c.pulse.peak_rabi = 30.0;
  c.pulse.delay = delay;
  return validate_config(c);
}

inline ChainConfig asymmetric_xi(double delay = 1.0) {
  ChainConfig c = five_state_reference(delay);
  c.couplings = {0.5, 0.7, 0.7, 0.9};
  c.symmetry_enforced = false;
  return validate_config(c);
}

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace stirap::fixtures
