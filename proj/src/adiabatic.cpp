#include "stirap/adiabatic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/SVD>

#include "stirap/errors.hpp"

namespace stirap {

namespace {

constexpr double kSignThreshold = 1e-9;

Eigen::VectorXd tridiag_apply(const SymTridiagonal& h, const Eigen::VectorXd& x) {
  const auto n = static_cast<Eigen::Index>(h.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = h.diagonal[i] * x(i);
    if (i > 0) acc += h.off_diagonal[i - 1] * x(i - 1);
    if (i + 1 < n) acc += h.off_diagonal[i] * x(i + 1);
    y(i) = acc;
  }
  return y;
}

// Half-open index ranges of eigenvalues (ascending) whose consecutive gaps are
// below tol * scale.
std::vector<std::pair<Eigen::Index, Eigen::Index>> degenerate_clusters(const Eigen::VectorXd& values,
                                                                       double scale, double tol) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  const auto n = values.size();
  Eigen::Index start = 0;
  for (Eigen::Index i = 1; i <= n; ++i) {
    if (i == n || values(i) - values(i - 1) > tol * scale) {
      if (i - start > 1) out.emplace_back(start, i);
      start = i;
    }
  }
  return out;
}

// Rotates the columns [a, b) of `vectors` (an invariant subspace) onto the
// orthonormal basis of that subspace closest to the best-matching columns of
// `reference`, and refreshes the corresponding Rayleigh quotients.
void align_cluster(Eigen::MatrixXd& vectors, Eigen::VectorXd& values, Eigen::Index a, Eigen::Index b,
                   const Eigen::MatrixXd& reference, const SymTridiagonal& h) {
  const Eigen::Index k = b - a;
  const Eigen::MatrixXd v = vectors.middleCols(a, k);
  const Eigen::VectorXd proj = (v.transpose() * reference).colwise().norm().transpose();

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(reference.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return proj(x) > proj(y); });
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());

  Eigen::MatrixXd rsel(reference.rows(), k);
  for (Eigen::Index c = 0; c < k; ++c) rsel.col(c) = reference.col(idx[static_cast<std::size_t>(c)]);

  const Eigen::MatrixXd p = v.transpose() * rsel;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(p, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd q = svd.matrixU() * svd.matrixV().transpose();
  vectors.middleCols(a, k) = v * q;
  for (Eigen::Index c = a; c < b; ++c) {
    values(c) = vectors.col(c).dot(tridiag_apply(h, vectors.col(c)));
  }
}

void apply_sign_convention(Eigen::MatrixXd& w) {
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index k = 0; k < w.rows(); ++k) {
      if (std::abs(w(k, j)) > kSignThreshold) {
        if (w(k, j) < 0) w.col(j) *= -1.0;
        break;
      }
    }
  }
}

AdiabaticFrame anchor_frame(const SymTridiagonal& h, double t, const TrackingOptions& options) {
  EigenSystem es = eigen_frame(h);
  const auto n = es.values.size();
  const Eigen::MatrixXd canonical = Eigen::MatrixXd::Identity(n, n);
  for (auto [a, b] : degenerate_clusters(es.values, h.max_abs(), options.degenerate_tol)) {
    align_cluster(es.vectors, es.values, a, b, canonical, h);
  }
  apply_sign_convention(es.vectors);
  return {t, es.values, es.vectors, false};
}

AdiabaticFrame continued_frame(const AdiabaticFrame& from, const SymTridiagonal& h, double t) {
  AdiabaticFrame f;
  f.t = t;
  f.vectors = from.vectors;
  f.eigenvalues = (from.vectors.transpose() * h.dense() * from.vectors).diagonal();
  f.continued = true;
  return f;
}

void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("time grid is empty");
  double tmax = 0.0;
  for (double t : grid) tmax = std::max(tmax, std::abs(t));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("time grid must be strictly increasing");
    if (std::abs(grid[i] + grid[grid.size() - 1 - i]) > 1e-12 * std::max(tmax, 1.0)) {
      throw ConfigError("time grid must be symmetric about t = 0");
    }
  }
}

}  // namespace

std::vector<double> symmetric_grid(double half_span, std::size_t points) {
  if (points < 2) throw ConfigError("grid needs at least 2 points");
  if (!(half_span > 0.0)) throw ConfigError("grid half span must be positive");
  std::vector<double> grid(points);
  const double m = static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = half_span * (2.0 * static_cast<double>(i) - m) / m;
  }
  return grid;
}

AdiabaticFrame align_frame(const EigenSystem& raw, const SymTridiagonal& h,
                           const Eigen::MatrixXd& reference, double t,
                           const TrackingOptions& options) {
  Eigen::MatrixXd e = raw.vectors;
  Eigen::VectorXd lam = raw.values;
  const auto n = lam.size();
  for (auto [a, b] : degenerate_clusters(lam, h.max_abs(), options.degenerate_tol)) {
    align_cluster(e, lam, a, b, reference, h);
  }

  // Greedy maximal-overlap matching of new columns to reference columns.
  const Eigen::MatrixXd overlap = reference.transpose() * e;
  std::vector<Eigen::Index> match(static_cast<std::size_t>(n), -1);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(n * n));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) pairs.emplace_back(std::abs(overlap(r, c)), r, c);
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });
  for (const auto& [value, r, c] : pairs) {
    if (match[static_cast<std::size_t>(r)] >= 0 || used[static_cast<std::size_t>(c)]) continue;
    if (value < options.min_overlap) {
      std::ostringstream os;
      os << "adiabatic tracking lost state " << r + 1 << " at t=" << t << " (best overlap " << value
         << ")";
      throw TrackingError(os.str(), t);
    }
    match[static_cast<std::size_t>(r)] = c;
    used[static_cast<std::size_t>(c)] = true;
  }

  AdiabaticFrame f;
  f.t = t;
  f.eigenvalues.resize(n);
  f.vectors.resize(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index c = match[static_cast<std::size_t>(r)];
    const double sign = overlap(r, c) < 0.0 ? -1.0 : 1.0;
    f.vectors.col(r) = sign * e.col(c);
    f.eigenvalues(r) = lam(c);
  }
  return f;
}

std::vector<AdiabaticFrame> track_frames(const HamiltonianFn& hamiltonian,
                                         std::span<const double> grid,
                                         const TrackingOptions& options) {
  check_grid(grid);
  const std::size_t m = grid.size();
  std::vector<SymTridiagonal> hs;
  hs.reserve(m);
  std::vector<double> norms(m);
  double scale = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    hs.push_back(hamiltonian(grid[i]));
    norms[i] = hs.back().max_abs();
    scale = std::max(scale, norms[i]);
  }
  const auto n = static_cast<Eigen::Index>(hs.front().size());
  std::vector<AdiabaticFrame> frames(m);

  if (scale == 0.0) {
    for (std::size_t i = 0; i < m; ++i) {
      frames[i] = {grid[i], Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n), true};
    }
    return frames;
  }

  std::size_t lo = 0;
  while (norms[lo] < options.near_zero_tol * scale) ++lo;
  std::size_t hi = m - 1;
  while (norms[hi] < options.near_zero_tol * scale) --hi;
  const std::size_t anchor = std::clamp(m / 2, lo, hi);

  frames[anchor] = anchor_frame(hs[anchor], grid[anchor], options);
  for (std::size_t i = anchor + 1; i <= hi; ++i) {
    frames[i] = align_frame(eigen_frame(hs[i]), hs[i], frames[i - 1].vectors, grid[i], options);
  }
  for (std::size_t i = anchor; i-- > lo;) {
    frames[i] = align_frame(eigen_frame(hs[i]), hs[i], frames[i + 1].vectors, grid[i], options);
  }
  for (std::size_t i = hi + 1; i < m; ++i) frames[i] = continued_frame(frames[hi], hs[i], grid[i]);
  for (std::size_t i = 0; i < lo; ++i) frames[i] = continued_frame(frames[lo], hs[i], grid[i]);
  return frames;
}

std::vector<AdiabaticFrame> track_frames(const ChainConfig& config, std::span<const double> grid,
                                         const TrackingOptions& options) {
  return track_frames([&config](double t) { return hamiltonian_at(config, t); }, grid, options);
}

ComplexMatrix nonadiabatic_matrix(std::span<const AdiabaticFrame> frames, std::size_t index) {
  if (index == 0 || index + 1 >= frames.size()) {
    throw std::out_of_range("nonadiabatic_matrix: index must not lie on the grid boundary");
  }
  const auto& prev = frames[index - 1];
  const auto& next = frames[index + 1];
  const Eigen::MatrixXd wdot = (next.vectors - prev.vectors) / (next.t - prev.t);
  Eigen::MatrixXd a = frames[index].vectors.transpose() * wdot;
  a = 0.5 * (a - a.transpose()).eval();
  return Complex(0.0, -1.0) * a.cast<Complex>();
}

std::vector<CaseLabel> classify_states(std::span<const AdiabaticFrame> frames,
                                       const ClassificationOptions& options) {
  if (frames.empty()) throw ClassificationError("no frames to classify");
  const std::size_t m = frames.size();
  const auto n = frames.front().vectors.cols();
  const Eigen::Index mid = n / 2;
  std::vector<CaseLabel> labels(static_cast<std::size_t>(n));

  for (Eigen::Index j = 0; j < n; ++j) {
    double evidence = 0.0;
    double res_plus = 0.0;
    double res_minus = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto& w = frames[i].vectors;
      const auto& wm = frames[m - 1 - i].vectors;
      evidence = std::max(evidence, std::abs(w(mid, j)));
      for (Eigen::Index k = 0; k < n; ++k) {
        res_plus = std::max(res_plus, std::abs(w(k, j) - wm(n - 1 - k, j)));
        res_minus = std::max(res_minus, std::abs(w(k, j) + wm(n - 1 - k, j)));
      }
    }
    CaseLabel& label = labels[static_cast<std::size_t>(j)];
    label.middle_evidence = evidence;
    label.kind = evidence < options.case_tol ? CaseKind::case_II : CaseKind::case_I;
    label.mirror_sign = res_minus < res_plus ? -1 : 1;
    label.mirror_residual = std::min(res_plus, res_minus);

    std::ostringstream os;
    os << "adiabatic state " << j + 1 << ": ";
    if (label.mirror_residual > options.mirror_tol) {
      os << "mirror relation fails for both signs (residuals " << res_plus << ", " << res_minus
         << ")";
      throw ClassificationError(os.str());
    }
    if (label.kind == CaseKind::case_II && label.mirror_sign > 0) {
      os << "vanishing middle component but even mirror relation";
      throw ClassificationError(os.str());
    }
  }
  return labels;
}

Eigen::VectorXd case_signs(std::span<const CaseLabel> labels) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    s(static_cast<Eigen::Index>(j)) = labels[j].mirror_sign < 0 ? -1.0 : 1.0;
  }
  return s;
}

AdiabaticTransition adiabatic_transition_matrix(const ChainConfig& config,
                                                const IntegratorSettings& settings,
                                                std::span<const AdiabaticFrame> frames) {
  if (frames.empty()) throw ConfigError("no adiabatic frames supplied");
  const double tf = integration_half_span(config, settings);
  if (std::abs(frames.front().t + tf) > 1e-9 * tf || std::abs(frames.back().t - tf) > 1e-9 * tf) {
    throw ConfigError("adiabatic frames must span the integration window");
  }
  AdiabaticTransition out;
  out.diabatic = transition_matrix(config, settings);
  out.w_initial = frames.front().vectors;
  out.w_final = frames.back().vectors;
  out.ua = out.w_final.transpose().cast<Complex>() * out.diabatic.entries *
           out.w_initial.cast<Complex>();
  return out;
}

AdiabaticTransition adiabatic_transition_matrix(const ChainConfig& config,
                                                const IntegratorSettings& settings,
                                                std::size_t grid_points,
                                                const TrackingOptions& options) {
  const auto grid = symmetric_grid(integration_half_span(config, settings), grid_points);
  const auto frames = track_frames(config, grid, options);
  return adiabatic_transition_matrix(config, settings, frames);
}

TransitionMatrix integrate_adiabatic(const ChainConfig& config, const IntegratorSettings& settings,
                                     std::span<const AdiabaticFrame> frames,
                                     const TrackingOptions& options) {
  if (frames.size() < 2) throw ConfigError("need at least two adiabatic frames");
  const auto n = static_cast<Eigen::Index>(config.num_states);
  const std::size_t m = frames.size();

  std::size_t lo = 0;
  while (lo < m && frames[lo].continued) ++lo;
  std::size_t hi = m;
  while (hi > lo && frames[hi - 1].continued) --hi;
  const bool has_interior = lo < hi;
  if (has_interior) {
    --hi;  // inclusive
    for (std::size_t i = lo; i <= hi; ++i) {
      if (frames[i].continued) {
        throw TrackingError("continued frame inside the adiabatic window", frames[i].t);
      }
    }
  }

  // Generator of da/dt = -(i D + A) a with D = W^T H W and A = W^T dW/dt.
  auto frozen_generator = [&config](const Eigen::MatrixXd& w, double t) {
    const Eigen::MatrixXd d = w.transpose() * hamiltonian_at(config, t).dense() * w;
    return ComplexMatrix(Complex(0.0, -1.0) * d.cast<Complex>());
  };
  auto moving_generator = [&](double t) {
    const SymTridiagonal h = hamiltonian_at(config, t);
    auto it = std::lower_bound(frames.begin() + static_cast<std::ptrdiff_t>(lo),
                               frames.begin() + static_cast<std::ptrdiff_t>(hi) + 1, t,
                               [](const AdiabaticFrame& f, double x) { return f.t < x; });
    std::size_t idx = static_cast<std::size_t>(it - frames.begin());
    if (idx > hi) idx = hi;
    if (idx > lo && std::abs(frames[idx - 1].t - t) < std::abs(frames[idx].t - t)) --idx;

    const AdiabaticFrame f = align_frame(eigen_frame(h), h, frames[idx].vectors, t, options);
    const Eigen::MatrixXd hdot = hamiltonian_derivative_at(config, t).dense();
    const Eigen::MatrixXd coupling = f.vectors.transpose() * hdot * f.vectors;
    const double gap_floor = options.degenerate_tol * h.max_abs();
    ComplexMatrix g = ComplexMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      g(j, j) = Complex(0.0, -f.eigenvalues(j));
      for (Eigen::Index k = 0; k < n; ++k) {
        if (j == k) continue;
        const double gap = f.eigenvalues(k) - f.eigenvalues(j);
        if (std::abs(gap) > gap_floor) g(j, k) = -coupling(j, k) / gap;
      }
    }
    return g;
  };

  StateVector state = Eigen::Map<const StateVector>(ComplexMatrix::Identity(n, n).eval().data(), n * n);
  TransitionMatrix out;
  auto run = [&](double t0, double t1, auto&& generator) {
    if (t1 <= t0) return;
    auto rhs = [&](double t, const StateVector& y, StateVector& dy) {
      const ComplexMatrix g = generator(t);
      dy.resize(n * n);
      Eigen::Map<ComplexMatrix>(dy.data(), n, n) = g * Eigen::Map<const ComplexMatrix>(y.data(), n, n);
    };
    const PropagationResult r = integrate_dp45(rhs, state, t0, t1, settings);
    state = r.state;
    out.error_estimate += r.error_estimate;
    out.steps += r.accepted_steps;
  };

  if (!has_interior) {
    const Eigen::MatrixXd w = frames.front().vectors;
    run(frames.front().t, frames.back().t, [&](double t) { return frozen_generator(w, t); });
  } else {
    const Eigen::MatrixXd w_lo = frames[lo].vectors;
    const Eigen::MatrixXd w_hi = frames[hi].vectors;
    run(frames.front().t, frames[lo].t, [&](double t) { return frozen_generator(w_lo, t); });
    run(frames[lo].t, frames[hi].t, moving_generator);
    run(frames[hi].t, frames.back().t, [&](double t) { return frozen_generator(w_hi, t); });
  }
  out.entries = Eigen::Map<const ComplexMatrix>(state.data(), n, n);
  return out;
}

double check_ua_symmetry(const ComplexMatrix& ua, std::span<const CaseLabel> labels) {
  const auto n = ua.rows();
  Eigen::VectorXd s = Eigen::VectorXd::Ones(n);
  if (!labels.empty()) {
    if (static_cast<Eigen::Index>(labels.size()) != n) {
      throw std::invalid_argument("case labels do not match the matrix dimension");
    }
    s = case_signs(labels);
  }
  const ComplexMatrix sc = s.cast<Complex>().asDiagonal();
  const ComplexMatrix d = ua.transpose() - sc * ua * sc;
  return d.cwiseAbs().maxCoeff();
}

void write_frames_csv(std::span<const AdiabaticFrame> frames, bool with_vectors, std::ostream& out) {
  if (frames.empty()) return;
  const auto n = frames.front().eigenvalues.size();
  out << "t_over_T";
  for (Eigen::Index j = 1; j <= n; ++j) out << ",lambda_" << j;
  if (with_vectors) {
    for (Eigen::Index r = 1; r <= n; ++r) {
      for (Eigen::Index c = 1; c <= n; ++c) out << ",W_" << r << '_' << c;
    }
  }
  out << '\n';
  const auto old_precision = out.precision(12);
  for (const auto& f : frames) {
    out << f.t;
    for (Eigen::Index j = 0; j < n; ++j) out << ',' << f.eigenvalues(j);
    if (with_vectors) {
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) out << ',' << f.vectors(r, c);
      }
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace stirap
