#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "stirap/adiabatic.hpp"
#include "stirap/errors.hpp"
#include "test_support.hpp"

using namespace stirap;
using fixtures::max_abs_diff;

namespace {

std::vector<AdiabaticFrame> frames_for(const ChainConfig& c, std::size_t points = 2001) {
  IntegratorSettings s;
  const auto grid = symmetric_grid(integration_half_span(c, s), points);
  return track_frames(c, grid);
}

ChainConfig gaussian_detuning_three_state() {
  ChainConfig c = fixtures::three_state_resonant();
  c.detunings[0].gauss_amp = 15.0;
  return validate_config(c);
}

}  // namespace

TEST(Adiabatic, SymmetricGridIsExactlyAntisymmetric) {
  const auto g = symmetric_grid(7.0, 2001);
  ASSERT_EQ(g.size(), 2001u);
  EXPECT_EQ(g.front(), -7.0);
  EXPECT_EQ(g.back(), 7.0);
  EXPECT_EQ(g[1000], 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], -g[g.size() - 1 - i]);
  EXPECT_THROW(symmetric_grid(7.0, 1), ConfigError);
  EXPECT_THROW(symmetric_grid(0.0, 11), ConfigError);
}

TEST(Adiabatic, GridMustBeSymmetricAndIncreasing) {
  const ChainConfig c = five_state_reference(1.0);
  const std::vector<double> lopsided{-1.0, 0.0, 2.0};
  const std::vector<double> unsorted{1.0, 0.0, -1.0};
  EXPECT_THROW(track_frames(c, lopsided), ConfigError);
  EXPECT_THROW(track_frames(c, unsorted), ConfigError);
}

TEST(Adiabatic, FrozenHamiltonianGivesIdenticalFrames) {
  const SymTridiagonal h{{0.0, 1.5, 0.0}, {2.0, 0.5}};
  const auto grid = symmetric_grid(3.0, 51);
  const auto frames = track_frames([&h](double) { return h; }, grid);
  for (const auto& f : frames) {
    EXPECT_EQ(f.vectors, frames.front().vectors);
    EXPECT_EQ(f.eigenvalues, frames.front().eigenvalues);
  }
  EXPECT_EQ(nonadiabatic_matrix(frames, 10), ComplexMatrix::Zero(3, 3));
}

TEST(Adiabatic, ZeroHamiltonianGivesIdentityFrames) {
  ChainConfig c = five_state_reference(1.0);
  c.pulse.peak_rabi = 0.0;
  const auto frames = frames_for(validate_config(c), 101);
  for (const auto& f : frames) EXPECT_EQ(f.vectors, Eigen::MatrixXd::Identity(5, 5));
}

TEST(Adiabatic, FramesAreOrthonormalEigenbases) {
  const ChainConfig c = five_state_reference(1.0);
  const auto frames = frames_for(c);
  for (const auto& f : frames) {
    const auto& w = f.vectors;
    EXPECT_LT((w.transpose() * w - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
    if (f.continued) continue;
    const Eigen::MatrixXd h = hamiltonian_at(c, f.t).dense();
    const double scale = h.cwiseAbs().maxCoeff();
    EXPECT_LT((h * w - w * f.eigenvalues.asDiagonal()).cwiseAbs().maxCoeff(), 1e-10 * scale);
    const Eigen::MatrixXd hd = w.transpose() * h * w;
    EXPECT_LT((hd - Eigen::MatrixXd(hd.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 1e-10 * scale);
  }
}

TEST(Adiabatic, TrackedSignsAreContinuous) {
  const auto frames = frames_for(five_state_reference(1.0));
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const Eigen::VectorXd d = (frames[i - 1].vectors.transpose() * frames[i].vectors).diagonal();
    EXPECT_GT(d.minCoeff(), 0.0) << "t=" << frames[i].t;
  }
}

TEST(Adiabatic, ReferenceEigenvaluesAreEvenInTime) {
  const auto frames = frames_for(five_state_reference(1.0));
  const std::size_t m = frames.size();
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::VectorXd a = frames[i].eigenvalues, b = frames[m - 1 - i].eigenvalues;
    std::sort(a.data(), a.data() + a.size());
    std::sort(b.data(), b.data() + b.size());
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Adiabatic, ThreeStateDarkStateHasZeroEnergyAndNoMiddleComponent) {
  const auto frames = frames_for(fixtures::three_state_resonant());
  for (const auto& f : frames) {
    EXPECT_LT(std::abs(f.eigenvalues(1)), 1e-12) << "t=" << f.t;
    EXPECT_LT(std::abs(f.vectors(1, 1)), 1e-12) << "t=" << f.t;
  }
  const auto labels = classify_states(frames);
  ASSERT_EQ(labels.size(), 3u);
  EXPECT_EQ(labels[0].kind, CaseKind::case_I);
  EXPECT_EQ(labels[1].kind, CaseKind::case_II);
  EXPECT_EQ(labels[2].kind, CaseKind::case_I);
  EXPECT_EQ(case_signs(labels), Eigen::Vector3d(1.0, -1.0, 1.0));
}

TEST(Adiabatic, DarkBrightCouplingFollowsMixingAngle) {
  // Bright states (P +/- B)/sqrt(2) couple to the dark state with theta'/sqrt(2),
  // tan(theta) = pump / Stokes. Grid differencing is second order in the spacing.
  const ChainConfig c = fixtures::three_state_resonant();
  auto theta = [&c](double t) {
    const auto h = hamiltonian_at(c, t);
    return std::atan2(h.off_diagonal[0], h.off_diagonal[1]);
  };
  double peak = 0.0;
  auto worst_on = [&](std::size_t points, std::size_t stride) {
    const auto frames = frames_for(c, points);
    double worst = 0.0;
    for (std::size_t i = 300 * stride; i + 300 * stride < frames.size(); i += 10 * stride) {
      const double t = frames[i].t;
      const double dtheta = (theta(t + 1e-5) - theta(t - 1e-5)) / 2e-5;
      const ComplexMatrix a = nonadiabatic_matrix(frames, i);
      for (Eigen::Index bright : {0, 2}) {
        worst = std::max(worst, std::abs(std::abs(a(bright, 1)) - std::abs(dtheta) / std::sqrt(2.0)));
      }
      peak = std::max(peak, std::abs(dtheta));
    }
    return worst;
  };
  const double coarse = worst_on(2001, 1);
  const double fine = worst_on(4001, 2);
  EXPECT_NEAR(coarse / fine, 4.0, 0.3);
  EXPECT_LT(fine, 1e-4 * peak);
}

TEST(Adiabatic, ReferenceStatesAreAllCaseI) {
  const auto labels = classify_states(frames_for(five_state_reference(1.0)));
  for (const auto& l : labels) {
    EXPECT_EQ(l.kind, CaseKind::case_I);
    EXPECT_LT(l.mirror_residual, 1e-8);
  }
  // States antisymmetric at t = 0 mirror with s = -1 despite a nonzero middle component.
  EXPECT_EQ(case_signs(labels), (Eigen::VectorXd(5) << 1, -1, 1, -1, 1).finished());
}

TEST(Adiabatic, ConstantDetuningKeepsDarkState) {
  ChainConfig c = fixtures::three_state_resonant();
  c.detunings[0].constant = 15.0;
  const auto labels = classify_states(frames_for(validate_config(c)));
  EXPECT_EQ(labels[1].kind, CaseKind::case_II);
}

TEST(Adiabatic, GaussianDetuningRemovesCaseII) {
  const auto labels = classify_states(frames_for(gaussian_detuning_three_state()));
  ASSERT_EQ(labels.size(), 3u);
  for (const auto& l : labels) EXPECT_LT(l.mirror_residual, 1e-8);
}

TEST(Adiabatic, AsymmetricDetuningFailsClassification) {
  ChainConfig c = five_state_reference(1.0);
  c.detunings = {Detuning{2.0}, Detuning{}, Detuning{5.0}};
  c.symmetry_enforced = false;
  EXPECT_THROW(classify_states(frames_for(validate_config(c))), ClassificationError);
}

TEST(Adiabatic, NonadiabaticMatrixIsHermitianWithZeroDiagonal) {
  const auto frames = frames_for(five_state_reference(1.0));
  for (std::size_t i : {1u, 500u, 1000u, 1999u}) {
    const ComplexMatrix a = nonadiabatic_matrix(frames, i);
    EXPECT_LT(max_abs_diff(a, a.adjoint()), 1e-15);
    for (Eigen::Index j = 0; j < 5; ++j) EXPECT_EQ(a(j, j), Complex(0.0, 0.0));
    EXPECT_EQ(a.real(), Eigen::MatrixXd::Zero(5, 5));
  }
  EXPECT_THROW(nonadiabatic_matrix(frames, 0), std::out_of_range);
  EXPECT_THROW(nonadiabatic_matrix(frames, frames.size() - 1), std::out_of_range);
}

TEST(Adiabatic, CouplingParityFollowsMirrorSigns) {
  for (const ChainConfig& c : {five_state_reference(1.0), fixtures::three_state_resonant()}) {
    const auto frames = frames_for(c);
    const auto labels = classify_states(frames);
    const std::size_t m = frames.size();
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < m; ++i) {
      const ComplexMatrix a = nonadiabatic_matrix(frames, i);
      const ComplexMatrix b = nonadiabatic_matrix(frames, m - 1 - i);
      for (Eigen::Index j = 0; j < a.rows(); ++j)
        for (Eigen::Index k = 0; k < a.rows(); ++k)
          worst = std::max(worst, std::abs(b(j, k) + double(labels[j].mirror_sign * labels[k].mirror_sign) * a(j, k)));
    }
    EXPECT_LT(worst, 1e-8);
  }
}

TEST(Adiabatic, AlignFrameUndoesPermutationAndSigns) {
  const SymTridiagonal h{{0.0, 1.0, -2.0, 0.5}, {1.0, 0.7, 0.3}};
  const EigenSystem raw = eigen_frame(h);
  Eigen::MatrixXd reference(4, 4);
  reference << raw.vectors.col(2), -raw.vectors.col(0), raw.vectors.col(3), -raw.vectors.col(1);
  const AdiabaticFrame f = align_frame(raw, h, reference, 0.0);
  EXPECT_LT((f.vectors - reference).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(f.eigenvalues, Eigen::Vector4d(raw.values(2), raw.values(0), raw.values(3), raw.values(1)));
}

TEST(Adiabatic, AlignFrameAlignsDegenerateCluster) {
  const SymTridiagonal h{{1.0, 1.0, 3.0}, {0.0, 0.0}};
  const EigenSystem raw = eigen_frame(h);
  const double c = std::cos(0.3), s = std::sin(0.3);
  Eigen::Matrix3d reference;
  reference << c, -s, 0, s, c, 0, 0, 0, 1;
  const AdiabaticFrame f = align_frame(raw, h, reference, 0.0);
  EXPECT_LT((f.vectors - reference).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Adiabatic, AlignFrameReportsLostState) {
  const SymTridiagonal h{{0.0, 1.0}, {0.0}};
  const EigenSystem raw = eigen_frame(h);
  const double r = std::sqrt(0.5);
  Eigen::Matrix2d reference;
  reference << r, -r, r, r;
  TrackingOptions strict;
  strict.min_overlap = 0.9;
  try {
    align_frame(raw, h, reference, 2.5, strict);
    FAIL() << "expected TrackingError";
  } catch (const TrackingError& e) {
    EXPECT_EQ(e.time(), 2.5);
  }
}

TEST(Adiabatic, FrozenAdiabaticTransitionIsDiagonalPhase) {
  ChainConfig c = five_state_reference(1.0);
  c.pulse.peak_rabi = 0.0;
  c.detunings = {Detuning{1.0}, Detuning{-2.0}, Detuning{1.0}};
  c = validate_config(c);
  IntegratorSettings s;
  const double tf = integration_half_span(c, s);
  const auto frames = frames_for(c, 201);
  const auto at = adiabatic_transition_matrix(c, s, frames);
  const auto& lam = frames.front().eigenvalues;
  ComplexMatrix expected = ComplexMatrix::Zero(5, 5);
  for (Eigen::Index j = 0; j < 5; ++j) expected(j, j) = std::polar(1.0, -lam(j) * 2.0 * tf);
  EXPECT_LT(max_abs_diff(at.ua, expected), 1e-8);
}

TEST(Adiabatic, ReferenceAdiabaticTransitionSymmetry) {
  const ChainConfig c = five_state_reference(1.0);
  IntegratorSettings s;
  const auto frames = frames_for(c);
  const auto labels = classify_states(frames);
  const auto at = adiabatic_transition_matrix(c, s, frames);
  EXPECT_LT(check_ua_symmetry(at.ua, labels), 1e-6);
  const ComplexMatrix back = at.w_final.cast<Complex>() * at.ua * at.w_initial.transpose().cast<Complex>();
  EXPECT_LT(max_abs_diff(back, at.diabatic.entries), 1e-12);
}

TEST(Adiabatic, ThreeStateAdiabaticTransitionCaseB) {
  const ChainConfig c = fixtures::three_state_resonant();
  IntegratorSettings s;
  const auto frames = frames_for(c);
  const auto labels = classify_states(frames);
  const auto at = adiabatic_transition_matrix(c, s, frames);
  EXPECT_LT(check_ua_symmetry(at.ua, labels), 1e-6);
}

TEST(Adiabatic, UaSymmetryOfIdentityAndAsymmetricChain) {
  EXPECT_EQ(check_ua_symmetry(ComplexMatrix::Identity(5, 5), {}), 0.0);
  const ChainConfig c = fixtures::asymmetric_xi();
  IntegratorSettings s;
  const auto at = adiabatic_transition_matrix(c, s, frames_for(c));
  EXPECT_GT(check_ua_symmetry(at.ua, {}), 1e-3);
}

TEST(Adiabatic, DirectIntegrationMatchesTransformedMatrix) {
  for (const ChainConfig& c : {five_state_reference(1.0), fixtures::three_state_resonant(),
                               gaussian_detuning_three_state()}) {
    IntegratorSettings s;
    const auto frames = frames_for(c);
    const auto at = adiabatic_transition_matrix(c, s, frames);
    const auto direct = integrate_adiabatic(c, s, frames);
    EXPECT_LT(max_abs_diff(direct.entries, at.ua), 1e-6);
  }
}

TEST(Adiabatic, FramesCsvLayout) {
  const auto frames = frames_for(fixtures::three_state_resonant(), 11);
  std::ostringstream plain, full;
  write_frames_csv(frames, false, plain);
  write_frames_csv(frames, true, full);
  std::istringstream a(plain.str()), b(full.str());
  std::string header;
  std::getline(a, header);
  EXPECT_EQ(header, "t_over_T,lambda_1,lambda_2,lambda_3");
  std::getline(b, header);
  EXPECT_EQ(header.rfind("t_over_T,lambda_1,lambda_2,lambda_3,W_1_1,W_1_2", 0), 0u);
  std::size_t rows = 0;
  for (std::string line; std::getline(a, line);) ++rows;
  EXPECT_EQ(rows, 11u);
}
