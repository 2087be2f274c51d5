#pragma once

// Adiabatic frame of the chain Hamiltonian: instantaneous eigenvalues,
// continuously tracked real eigenvectors W(t), nonadiabatic couplings
// -i W^T dW/dt, the case I / case II classification of the eigenstates under
// the index mirror k -> N+1-k, and the transition matrix in the adiabatic
// basis.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stirap/chain_model.hpp"
#include "stirap/eigensolver.hpp"
#include "stirap/propagator.hpp"

namespace stirap {

struct AdiabaticFrame {
  double t = 0.0;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd vectors;  // column j is w^j(t)
  // True when the frame was carried over from the last well-conditioned grid
  // point instead of being diagonalized (near-zero H in the window tails).
  // Eigenvalues of a continued frame are the diagonal of W^T H W.
  bool continued = false;
};

struct TrackingOptions {
  double degenerate_tol = 1e-12;  // eigenvalue gap, relative to max|H_ij|
  double near_zero_tol = 1e-10;   // max|H_ij| relative to its maximum over the grid
  double min_overlap = 0.5;
};

struct ClassificationOptions {
  double case_tol = 1e-10;
  double mirror_tol = 1e-8;
};

enum class CaseKind { case_I, case_II };

struct CaseLabel {
  CaseKind kind = CaseKind::case_I;
  double middle_evidence = 0.0;  // max_t |w_{n+1}(t)|
  int mirror_sign = 1;           // s in w_k(-t) = s w_{N+1-k}(t)
  double mirror_residual = 0.0;  // residual for the chosen sign
};

// t_i = T (2i - (M-1)) / (M-1); exactly antisymmetric under i -> M-1-i.
std::vector<double> symmetric_grid(double half_span, std::size_t points);

// Reorders, re-signs and (within degenerate clusters) rotates the columns of
// `raw` to best continue `reference`. Throws TrackingError when a column has
// no partner with |overlap| >= min_overlap.
AdiabaticFrame align_frame(const EigenSystem& raw, const SymTridiagonal& h,
                           const Eigen::MatrixXd& reference, double t,
                           const TrackingOptions& options = {});

/// Eigenframes along a grid that is strictly increasing and symmetric about
/// zero. Tracking starts at the grid center with ascending eigenvalues and
/// proceeds outward in both directions; each new frame keeps the labels and
/// signs of its inner neighbour (positive diagonal overlap). Frames in the
/// near-zero tails are continued, not diagonalized.
std::vector<AdiabaticFrame> track_frames(const HamiltonianFn& hamiltonian,
                                         std::span<const double> grid,
                                         const TrackingOptions& options = {});
std::vector<AdiabaticFrame> track_frames(const ChainConfig& config, std::span<const double> grid,
                                         const TrackingOptions& options = {});

/// -i W^T dW/dt at grid index i, by central differences of the tracked
/// frames, antisymmetrized so the result is Hermitian with zero diagonal.
ComplexMatrix nonadiabatic_matrix(std::span<const AdiabaticFrame> frames, std::size_t index);

/// Labels each adiabatic state and verifies the mirror relation
/// w_k(-t) = +/- w_{N+1-k}(t). Throws ClassificationError when neither sign
/// fits within mirror_tol.
std::vector<CaseLabel> classify_states(std::span<const AdiabaticFrame> frames,
                                       const ClassificationOptions& options = {});

// Diagonal of the sign matrix: the mirror sign of each state.
Eigen::VectorXd case_signs(std::span<const CaseLabel> labels);

struct AdiabaticTransition {
  ComplexMatrix ua;          // W^T(+t_f) U W(-t_f)
  TransitionMatrix diabatic;  // U
  Eigen::MatrixXd w_initial;  // W(-t_f)
  Eigen::MatrixXd w_final;    // W(+t_f)
};

// `frames` must span the integration window [-t_f, t_f] of `config`.
AdiabaticTransition adiabatic_transition_matrix(const ChainConfig& config,
                                                const IntegratorSettings& settings,
                                                std::span<const AdiabaticFrame> frames);
AdiabaticTransition adiabatic_transition_matrix(const ChainConfig& config,
                                                const IntegratorSettings& settings,
                                                std::size_t grid_points = 2001,
                                                const TrackingOptions& options = {});

/// U^a by integrating i da/dt = (Lambda - i W^T dW/dt) a directly, with W(t)
/// from fresh diagonalizations aligned to the tracked frames and dW/dt from
/// first-order perturbation theory in dH/dt. In the continued tails W is held
/// fixed and the full W^T H W is used.
TransitionMatrix integrate_adiabatic(const ChainConfig& config, const IntegratorSettings& settings,
                                     std::span<const AdiabaticFrame> frames,
                                     const TrackingOptions& options = {});

/// max |(U^a)^T - S U^a S| with S = diag(mirror signs); S = identity when
/// `labels` is empty.
double check_ua_symmetry(const ComplexMatrix& ua, std::span<const CaseLabel> labels);

// CSV: t_over_T, lambda_1..lambda_N and, when requested, W row-major.
void write_frames_csv(std::span<const AdiabaticFrame> frames, bool with_vectors, std::ostream& out);

}  // namespace stirap
