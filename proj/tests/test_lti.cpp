#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace fjic {
namespace {

using testing::paper_plant;

Mat s1(double v) { return Mat::Constant(1, 1, v); }

std::vector<Complex> as_list(const CVec& v) { return {v.data(), v.data() + v.size()}; }

/// Greedy nearest matching of every element of `sub` into `set`; largest distance
/// relative to max(1, |element|).
double match_into(const std::vector<Complex>& sub, std::vector<Complex> set) {
  double worst = 0.0;
  for (const auto& r : sub) {
    auto best = set.begin();
    for (auto it = set.begin(); it != set.end(); ++it)
      if (std::abs(*it - r) < std::abs(*best - r)) best = it;
    if (best == set.end()) return 1e300;
    worst = std::max(worst, std::abs(*best - r) / std::max(1.0, std::abs(r)));
    set.erase(best);
  }
  return worst;
}

ShapedParams paper_shaping(double kf, double kg) { return recover_shaped(paper_plant(), s1(kf), s1(kg)); }

OuterLoop paper_outer() { return {s1(100.0), s1(10.0), Vec::Zero(1), false}; }

TEST(AssembleClosedLoop, IdentityShapingMatchesOpenLoop) {
  std::mt19937 rng(1);
  const auto lp = testing::random_plant(rng, 2);
  const ShapedParams sp{lp.J, lp.K, lp.D, false};
  const auto cl = assemble_closed_loop(lp, sp, std::nullopt);
  const auto ol = assemble_open_loop(lp);
  EXPECT_LE(match_into(as_list(cl.eigenvalues()), as_list(ol.eigenvalues())), 1e-6);
  EXPECT_LE((cl.A - ol.A).norm(), 1e-12 * ol.A.norm());
}

TEST(AssembleClosedLoop, PaperLoopHasRigidBodyMode) {
  const auto ss = assemble_closed_loop(paper_plant(), paper_shaping(0.9, 4.0), std::nullopt);
  const auto ev = ss.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  int zeros = 0;
  for (const auto& e : ev) zeros += std::abs(e) <= 1e-6 * scale;
  // Position and velocity of the free rigid body: a 2x2 Jordan block at 0.
  EXPECT_EQ(zeros, 2);
}

TEST(AssembleClosedLoop, OuterLoopRemovesRigidBodyMode) {
  const auto ss = assemble_closed_loop(paper_plant(), paper_shaping(0.9, 4.0), paper_outer());
  for (const auto& e : ss.eigenvalues()) {
    EXPECT_GT(std::abs(e), 1.0);
    EXPECT_LE(e.real(), 0.0);
  }
}

TEST(AssembleClosedLoop, LabelsAndShapes) {
  const auto ss = assemble_closed_loop(paper_plant(), paper_shaping(0.0, 0.0), std::nullopt);
  EXPECT_EQ(ss.states(), 4);
  EXPECT_EQ(ss.state_labels.front(), "q_1");
  EXPECT_EQ(ss.state_labels.back(), "z_1");
  EXPECT_EQ(ss.output_labels.front(), "qdot_1");
}

TEST(AssembleCoupled, ZeroEnvironmentEqualsClosedLoop) {
  const auto sp = paper_shaping(0.9, 1.0);
  const auto a = assemble_coupled(paper_plant(), sp, EnvironmentImpedance::none(1), paper_outer());
  const auto b = assemble_closed_loop(paper_plant(), sp, paper_outer());
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.B, b.B);
  EXPECT_EQ(a.C, b.C);
}

TEST(AssembleCoupled, AddedMassScalesMassRow) {
  const auto sp = paper_shaping(0.0, 0.0);
  const EnvironmentImpedance env{s1(1.0), s1(0.0), s1(0.0)};
  const auto with = assemble_coupled(paper_plant(), sp, env, std::nullopt);
  const auto without = assemble_closed_loop(paper_plant(), sp, std::nullopt);
  EXPECT_DOUBLE_EQ(with.A(0, 2), 0.25);
  EXPECT_DOUBLE_EQ(without.A(0, 2), 1.0 / 3.0);
}

TEST(AssembleCoupled, RandomPassiveInterconnectionsAreStable) {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 1 + trial % 3;
    const auto lp = testing::random_plant(rng, n);
    const auto sp = synthesize_gains(lp, testing::random_spd(rng, n, 0.1, 3.0), testing::random_spd(rng, n, 1e3, 1e5)).shaped;
    const EnvironmentImpedance env{testing::random_spd(rng, n, 0.0, 2.0), testing::random_spd(rng, n, 0.0, 20.0),
                                   testing::random_spd(rng, n, 0.0, 500.0)};
    const OuterLoop o{testing::random_spd(rng, n, 0.0, 200.0), testing::random_spd(rng, n, 0.0, 20.0), Vec::Zero(n), false};
    const auto ss = assemble_coupled(lp, sp, env, trial % 2 ? std::optional<OuterLoop>(o) : std::nullopt);
    for (const auto& e : ss.eigenvalues()) EXPECT_LE(e.real(), 1e-9 * std::max(1.0, std::abs(e)));
  }
}

TEST(AssembleCoupled, RejectsIndefiniteEnvironment) {
  const EnvironmentImpedance env{s1(0.0), s1(-1.0), s1(0.0)};
  EXPECT_THROW(assemble_coupled(paper_plant(), paper_shaping(0.0, 0.0), env, std::nullopt), Error);
}

TEST(Admittance1Dof, UnitParameters) {
  const ShapedParams sp{s1(1.0), s1(1.0), s1(1.0), false};
  const auto y = admittance_1dof(sp, 1.0);
  EXPECT_EQ(y.num.coeffs(), (Vec(3) << 1, 1, 1).finished());
  EXPECT_EQ(y.den.coeffs(), (Vec(4) << 0, 2, 2, 1).finished());
}

TEST(Admittance1Dof, ZerosAreShapedJointRoots) {
  const auto sp = paper_shaping(0.9, 4.0);
  const auto pz = poles_zeros(admittance_1dof(sp, 3.0));
  const auto joint = polynomial_roots(Polynomial{sp.K_e(0, 0), sp.D_e(0, 0), sp.J_e(0, 0)});
  EXPECT_LE(match_into(pz.zeros, joint), 1e-10);
}

TEST(Admittance1Dof, MatchesStateSpaceResponse) {
  const auto grid = log_grid(1e-2, 1e4, 50);
  for (double kf : {-0.9, 0.0, 0.9}) {
    for (double kg : {0.0, 1.0, 4.0}) {
      const auto sp = paper_shaping(kf, kg);
      const auto a = freq_response(admittance_1dof(sp, 3.0), grid);
      const auto b = freq_response(assemble_closed_loop(paper_plant(), sp, std::nullopt), 0, 0, grid);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_LE(std::abs(a[i].response - b[i].response), 1e-8 * std::abs(b[i].response)) << kf << ' ' << kg;
      }
    }
  }
}

TEST(Admittance1Dof, PolesMatchEigenvalues) {
  const auto sp = paper_shaping(0.9, 4.0);
  const auto pz = poles_zeros(admittance_1dof(sp, 3.0));
  const auto ev = as_list(assemble_closed_loop(paper_plant(), sp, std::nullopt).eigenvalues());
  EXPECT_LE(match_into(pz.poles, ev), 1e-6);
}

TEST(Admittance1Dof, MultiJointIsNotApplicable) {
  const ShapedParams sp{Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Zero(2, 2), true};
  EXPECT_THROW(admittance_1dof(sp, 1.0), Error);
}

TEST(TargetAdmittance, PaperTarget) {
  const auto y = target_admittance({s1(3.0), s1(10.0), s1(100.0)});
  EXPECT_EQ(y.num.coeffs(), (Vec(2) << 0, 1).finished());
  EXPECT_EQ(y.den.coeffs(), (Vec(3) << 100, 10, 3).finished());
  EXPECT_EQ(std::abs(y(Complex(0.0))), 0.0);
  const auto pz = poles_zeros(y);
  ASSERT_EQ(pz.zeros.size(), 1u);
  EXPECT_EQ(pz.zeros[0], Complex(0.0));
  for (const auto& p : pz.poles) {
    EXPECT_NEAR(p.real(), -1.667, 1e-3);
    EXPECT_NEAR(std::abs(p.imag()), 5.528, 1e-3);
  }
}

TEST(TargetAdmittance, HighFrequencySlope) {
  const auto y = target_admittance({s1(3.0), s1(10.0), s1(100.0)});
  const auto r = freq_response(y, {1e5, 1e6});
  EXPECT_NEAR(r[1].mag_db - r[0].mag_db, -20.0, 1e-3);
}

TEST(EnvImpedance, PureSpring) {
  const auto z = env_impedance_tf({s1(0.0), s1(0.0), s1(1.0)});
  EXPECT_EQ(z.num.trimmed().coeffs(), (Vec(1) << 1).finished());
  EXPECT_EQ(z.den.coeffs(), (Vec(2) << 0, 1).finished());
}

TEST(EnvImpedance, MassDamperSpring) {
  const auto z = env_impedance_tf({s1(1.0), s1(2.0), s1(3.0)});
  EXPECT_EQ(z.num.coeffs(), (Vec(3) << 3, 2, 1).finished());
  for (double w : log_grid(1e-2, 1e3, 20)) EXPECT_NEAR(z(Complex(0.0, w)).real(), 2.0, 1e-9);
  EXPECT_EQ(positive_real_check(z, log_grid(1e-2, 1e3, 100)).verdict, PassivityVerdict::Passive);
}

StateSpace siso(Mat A, Mat B, Mat C, double d = 0.0) {
  StateSpace ss;
  ss.A = std::move(A);
  ss.B = std::move(B);
  ss.C = std::move(C);
  ss.D = s1(d);
  return ss;
}

TEST(SsToTf, FirstOrderLag) {
  const auto tf = ss_to_tf(siso(s1(-1.0), s1(1.0), s1(1.0)), 0, 0);
  EXPECT_EQ(tf.num.trimmed().coeffs(), (Vec(1) << 1).finished());
  EXPECT_EQ(tf.den.coeffs(), (Vec(2) << 1, 1).finished());
}

TEST(SsToTf, DoubleIntegrator) {
  const Mat A = (Mat(2, 2) << 0, 1, 0, 0).finished();
  const auto tf = ss_to_tf(siso(A, (Mat(2, 1) << 0, 1).finished(), (Mat(1, 2) << 1, 0).finished()), 0, 0);
  EXPECT_EQ(tf.num.trimmed().coeffs(), (Vec(1) << 1).finished());
  EXPECT_EQ(tf.den.coeffs(), (Vec(3) << 0, 0, 1).finished());
}

TEST(SsToTf, FeedthroughIsKept) {
  const auto tf = ss_to_tf(siso(s1(-2.0), s1(1.0), s1(3.0), 0.5), 0, 0);
  EXPECT_NEAR(std::abs(tf(Complex(0.0, 1.0)) - (3.0 / Complex(2.0, 1.0) + 0.5)), 0.0, 1e-15);
}

TEST(SsToTf, PaperLoopEqualsAdmittanceAfterCancellation) {
  for (double kf : {-0.9, 0.0, 0.9}) {
    for (double kg : {0.0, 1.0, 4.0}) {
      const auto sp = paper_shaping(kf, kg);
      const auto tf = cancel_common_factors(ss_to_tf(assemble_closed_loop(paper_plant(), sp, std::nullopt), 0, 0));
      ASSERT_EQ(tf.cancelled.size(), 1u);
      EXPECT_LE(std::abs(tf.cancelled[0]), 1e-6);
      const auto y = admittance_1dof(sp, 3.0);
      const Vec a = tf.num.trimmed().coeffs() / tf.den.leading();
      const Vec b = y.num.coeffs() / y.den.leading();
      ASSERT_EQ(a.size(), b.size());
      EXPECT_LE((a - b).norm(), 1e-8 * b.norm());
      const Vec da = tf.den.coeffs() / tf.den.leading();
      const Vec db = y.den.coeffs() / y.den.leading();
      ASSERT_EQ(da.size(), db.size());
      EXPECT_LE((da - db).norm(), 1e-8 * db.norm());
    }
  }
}

TEST(SsToTf, AgreesWithResolventOnRandomSystems) {
  std::mt19937 rng(3);
  const auto grid = log_grid(1e-2, 1e3, 50);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + trial % 3;
    const auto lp = testing::random_plant(rng, n);
    const auto sp = synthesize_gains(lp, testing::random_spd(rng, n, 0.1, 3.0), testing::random_spd(rng, n, 1e3, 1e5)).shaped;
    const OuterLoop o{testing::random_spd(rng, n, 1.0, 200.0), testing::random_spd(rng, n, 1.0, 20.0), Vec::Zero(n), false};
    const auto ss = assemble_closed_loop(lp, sp, o);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto a = freq_response(ss_to_tf(ss, k, k), grid);
      const auto b = freq_response(ss, k, k, grid);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_LE(std::abs(a[i].response - b[i].response), 1e-6 * std::abs(b[i].response));
      }
    }
  }
}

TEST(SsToTf, PolesAreEigenvalues) {
  const auto ss = assemble_closed_loop(paper_plant(), paper_shaping(0.9, 4.0), paper_outer());
  const auto pz = poles_zeros(ss_to_tf(ss, 0, 0));
  EXPECT_LE(match_into(pz.poles, as_list(ss.eigenvalues())), 1e-6);
}

TEST(SsToTf, RefusesLargeSystems) {
  StateSpace ss = siso(-Mat::Identity(21, 21), Mat::Ones(21, 1), Mat::Ones(1, 21));
  try {
    ss_to_tf(ss, 0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotApplicable);
  }
}

TEST(FreqResponse, FirstOrderCorner) {
  const RationalTF tf{Polynomial{1.0}, Polynomial{1.0, 1.0}, {}};
  const auto r = freq_response(tf, {1.0})[0];
  EXPECT_NEAR(r.mag_db, -3.0103, 1e-4);
  EXPECT_NEAR(r.phase_deg, -45.0, 1e-12);
  const auto s = freq_response(siso(s1(-1.0), s1(1.0), s1(1.0)), 0, 0, {1.0})[0];
  EXPECT_NEAR(s.mag_db, r.mag_db, 1e-12);
  EXPECT_NEAR(s.phase_deg, r.phase_deg, 1e-12);
}

TEST(FreqResponse, ImaginaryPoleIsFlagged) {
  const RationalTF tf{Polynomial{1.0}, Polynomial{1.0, 0.0, 1.0}, {}};
  const auto r = freq_response(tf, {0.5, 1.0});
  EXPECT_FALSE(r[0].infinite);
  EXPECT_TRUE(r[1].infinite);
  const Mat A = (Mat(2, 2) << 0, 1, -1, 0).finished();
  const auto s = freq_response(siso(A, (Mat(2, 1) << 0, 1).finished(), (Mat(1, 2) << 1, 0).finished()), 0, 0, {1.0});
  EXPECT_TRUE(s[0].infinite);
}

TEST(FreqResponse, RejectsNonPositiveFrequency) {
  const RationalTF tf{Polynomial{1.0}, Polynomial{1.0, 1.0}, {}};
  EXPECT_THROW(freq_response(tf, {0.0}), Error);
}

TEST(PolesZeros, RepeatedPole) {
  const auto pz = poles_zeros({Polynomial{1.0}, Polynomial{1.0, 2.0, 1.0}, {}});
  for (const auto& p : pz.poles) EXPECT_LE(std::abs(p + 1.0), 1e-6);
}

TEST(CancelCommonFactors, RemovesSharedRealFactor) {
  const Polynomial num = Polynomial{2.0, 1.0} * Polynomial{1.0, 1.0};
  const Polynomial den = Polynomial{2.0, 1.0} * Polynomial{3.0, 1.0};
  const auto tf = cancel_common_factors({num, den, {}});
  ASSERT_EQ(tf.cancelled.size(), 1u);
  EXPECT_NEAR(tf.cancelled[0].real(), -2.0, 1e-12);
  EXPECT_EQ(tf.num.degree(), 1);
  EXPECT_LE(std::abs(tf(Complex(0.0, 2.0)) - Complex(1.0, 2.0) / Complex(3.0, 2.0)), 1e-12);
}

TEST(CancelCommonFactors, RemovesSharedComplexPair) {
  const Polynomial quad{5.0, 2.0, 1.0};  // roots -1 +- 2j
  const auto tf = cancel_common_factors({quad * Polynomial{1.0, 1.0}, quad * Polynomial{0.0, 4.0, 1.0}, {}});
  EXPECT_EQ(tf.cancelled.size(), 2u);
  EXPECT_EQ(tf.den.degree(), 2);
}

TEST(CancelCommonFactors, LeavesCoprimePairAlone) {
  const auto tf = cancel_common_factors({Polynomial{1.0, 1.0}, Polynomial{5.0, 4.0, 1.0}, {}});
  EXPECT_TRUE(tf.cancelled.empty());
  EXPECT_EQ(tf.den.degree(), 2);
}

TEST(PositiveReal, FirstOrderLagIsPassive) {
  const auto rep = positive_real_check({Polynomial{1.0}, Polynomial{1.0, 1.0}, {}}, log_grid(1e-2, 1e3, 200));
  EXPECT_EQ(rep.verdict, PassivityVerdict::Passive);
}

TEST(PositiveReal, RightHalfPlanePole) {
  const auto rep = positive_real_check({Polynomial{1.0}, Polynomial{-1.0, 1.0}, {}}, log_grid(1e-2, 1e3, 200));
  EXPECT_EQ(rep.verdict, PassivityVerdict::NotPassive);
  ASSERT_TRUE(rep.witness_pole);
  EXPECT_NEAR(rep.witness_pole->real(), 1.0, 1e-12);
}

TEST(PositiveReal, DoubleIntegratorIsNotPassive) {
  const auto rep = positive_real_check({Polynomial{1.0}, Polynomial{0.0, 0.0, 1.0}, {}}, log_grid(1e-2, 1e3, 200));
  EXPECT_EQ(rep.verdict, PassivityVerdict::NotPassive);
}

TEST(PositiveReal, IntegratorWithNegativeResidue) {
  const auto rep = positive_real_check({Polynomial{-1.0}, Polynomial{0.0, 1.0}, {}}, log_grid(1e-2, 1e3, 200));
  EXPECT_EQ(rep.verdict, PassivityVerdict::NotPassive);
}

TEST(PositiveReal, AllPassHasNegativeRealPart) {
  const auto rep = positive_real_check({Polynomial{-1.0, 1.0}, Polynomial{1.0, 1.0}, {}}, log_grid(1e-2, 1e3, 200));
  EXPECT_EQ(rep.verdict, PassivityVerdict::NotPassive);
  ASSERT_TRUE(rep.witness_omega);
  EXPECT_LT(*rep.witness_omega, 1.0);
}

TEST(PositiveReal, NarrowDipIsFoundOnAFineGrid) {
  // Re tf(jw) dips below zero only near w = 10, where the lightly damped
  // numerator resonance sits.
  const RationalTF tf{Polynomial{100.0, 1e-3, 1.0} * Polynomial{1e-7, 1.0},
                      Polynomial{100.0, 0.5, 1.0} * Polynomial{1.0, 1.0}, {}};
  const auto rep = positive_real_check(tf, log_grid(1.0, 100.0, 20001));
  EXPECT_EQ(rep.verdict, PassivityVerdict::NotPassive);
  ASSERT_TRUE(rep.witness_omega);
  EXPECT_NEAR(*rep.witness_omega, 10.0, 0.1);
}

TEST(PositiveReal, DoubtfulBandIsSettledBetweenGridPoints) {
  // Re tf(jw) < 0 only for roughly 100 < w^2 < 121; scaled so the two grid samples
  // fall inside the doubtful band [-1e-9, 1e-6].
  const RationalTF tf{1e-7 * Polynomial{100.0, 0.1, 1.0}, Polynomial{121.0, 0.1, 1.0}, {}};
  const auto rep = positive_real_check(tf, {1.0, 100.0});
  EXPECT_GE(rep.min_real_part, -1e-9);
  EXPECT_LE(rep.min_real_part, 1e-6);
  EXPECT_EQ(rep.verdict, PassivityVerdict::NotPassive);
  ASSERT_TRUE(rep.witness_omega);
  EXPECT_GT(*rep.witness_omega, 10.0);
  EXPECT_LT(*rep.witness_omega, 11.0);
}

TEST(PositiveReal, DoubtfulBandOutsideGridIsInconclusive) {
  const RationalTF tf{1e-7 * Polynomial{100.0, 0.1, 1.0}, Polynomial{121.0, 0.1, 1.0}, {}};
  EXPECT_EQ(positive_real_check(tf, {20.0, 100.0}).verdict, PassivityVerdict::Inconclusive);
}

TEST(PositiveReal, PaperSweepIsPassive) {
  const auto grid = log_grid(1e-2, 1e3, 400);
  for (double kf : {-0.9, 0.0, 0.9}) {
    for (double kg : {0.0, 1.0, 4.0}) {
      const auto sp = paper_shaping(kf, kg);
      EXPECT_EQ(positive_real_check(admittance_1dof(sp, 3.0), grid).verdict, PassivityVerdict::Passive);
      const auto outer = cancel_common_factors(ss_to_tf(assemble_closed_loop(paper_plant(), sp, paper_outer()), 0, 0));
      const auto rep = positive_real_check(outer, grid);
      EXPECT_EQ(rep.verdict, PassivityVerdict::Passive) << kf << ' ' << kg << ": " << rep.reason;
    }
  }
}

TEST(PositiveReal, OutsideForceFeedbackIntervalIsRejectedUpstream) {
  try {
    recover_shaped(paper_plant(), s1(-1.5), s1(0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapingInfeasible);
  }
}

}  // namespace
}  // namespace fjic
