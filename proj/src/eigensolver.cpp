#include "stirap/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "stirap/errors.hpp"

namespace stirap {

namespace {

constexpr int kMaxSweeps = 50;
constexpr double kSignThreshold = 1e-9;

// QL with implicit shifts on (d, e); e[i] couples rows i and i+1, e[n-1] is
// scratch. v accumulates the rotations and must start as the identity.
void tql2(std::vector<double>& d, std::vector<double>& e, Eigen::MatrixXd& v) {
  const std::size_t n = d.size();
  const double eps = std::numeric_limits<double>::epsilon();
  double shift_sum = 0.0;
  double tst1 = 0.0;

  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n - 1 && std::abs(e[m]) > eps * tst1) ++m;

    if (m > l) {
      int sweeps = 0;
      do {
        if (++sweeps > kMaxSweeps) {
          throw EigenSolverError("tridiagonal QL did not converge within 50 sweeps");
        }
        // Shift from the leading 2x2 block.
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        shift_sum += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          for (Eigen::Index k = 0; k < v.rows(); ++k) {
            const double vk = v(k, static_cast<Eigen::Index>(ii + 1));
            v(k, static_cast<Eigen::Index>(ii + 1)) = s * v(k, static_cast<Eigen::Index>(ii)) + c * vk;
            v(k, static_cast<Eigen::Index>(ii)) = c * v(k, static_cast<Eigen::Index>(ii)) - s * vk;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += shift_sum;
    e[l] = 0.0;
  }
}

}  // namespace

EigenSystem eigen_frame(const SymTridiagonal& h) {
  const std::size_t n = h.size();
  EigenSystem out;
  if (n == 0) return out;

  std::vector<double> d = h.diagonal;
  std::vector<double> e(n, 0.0);
  std::copy(h.off_diagonal.begin(), h.off_diagonal.end(), e.begin());
  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(nn, nn);
  if (n > 1) tql2(d, e, v);

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return d[a] < d[b]; });

  out.values.resize(nn);
  out.vectors.resize(nn, nn);
  for (Eigen::Index j = 0; j < nn; ++j) {
    out.values(j) = d[order[j]];
    out.vectors.col(j) = v.col(order[j]);
    for (Eigen::Index k = 0; k < nn; ++k) {
      const double x = out.vectors(k, j);
      if (std::abs(x) > kSignThreshold) {
        if (x < 0) out.vectors.col(j) *= -1.0;
        break;
      }
    }
  }
  return out;
}

}  // namespace stirap
