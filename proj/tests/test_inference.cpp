#include "oracles.hpp"
#include "test_util.hpp"

#include <pearl/inference.hpp>
#include <pearl/scenario.hpp>

#include <gtest/gtest.h>

using namespace pearl;
using pearl::testing::gaussian;
using pearl::testing::uniform;

namespace {

SplitScore part(double score, double variance, double information, double estimate, double one_step)
{
    SplitScore s;
    s.score = score;
    s.variance = variance;
    s.information = information;
    s.estimate = estimate;
    s.one_step = one_step;
    return s;
}

LambdaPolicy fixed(double lambda)
{
    LambdaPolicy p;
    p.mode = LambdaPolicy::Mode::fixed;
    p.fixed = lambda;
    return p;
}

double phi_prime(double t) { return -1.0 / (1.0 + std::exp(t)); }

} // namespace

TEST(PValue, NormalTail)
{
    EXPECT_EQ(two_sided_p_value(0.0), 1.0);
    EXPECT_NEAR(two_sided_p_value(1.96), 0.05, 5e-4);
    EXPECT_NEAR(two_sided_p_value(-1.96), 0.05, 5e-4);
    double prev = 1.0;
    for (double z = 0.1; z < 10.0; z += 0.1) {
        const double p = two_sided_p_value(z);
        EXPECT_LT(p, prev);
        EXPECT_GE(p, 0.0);
        prev = p;
    }
}

TEST(OneStep, Arithmetic)
{
    EXPECT_DOUBLE_EQ(one_step_estimate(0.5, 0.02, 0.4), 0.45);
    EXPECT_DOUBLE_EQ(one_step_estimate(0.5, 0.0, 0.4), 0.5);
}

TEST(Pool, IntervalFromFormula)
{
    const auto r = pool_and_test({part(0.0, 1.0, 2.0, 0.5, 0.5), part(0.0, 1.0, 2.0, 0.5, 0.5)}, 400, 0, 3);
    EXPECT_NEAR(r.ci_lo, 0.451, 1e-12);
    EXPECT_NEAR(r.ci_hi, 0.549, 1e-12);
    EXPECT_EQ(r.p_value, 1.0);
    EXPECT_EQ(r.coordinate, 1);
    EXPECT_EQ(r.K, 2);
}

TEST(Pool, ExactMeans)
{
    std::vector<SplitScore> folds;
    for (int k = 0; k < 5; ++k)
        folds.push_back(part(0.01 * k - 0.02, 0.5 + k, 1.0 + 0.1 * k, 0.2 * k, 0.3 * k - 0.1));
    const auto r = pool_and_test(folds, 500, 4, 10);
    double s = 0, v = 0, info = 0, est = 0, os = 0;
    for (const auto& f : folds) {
        s += f.score;
        v += f.variance;
        info += f.information;
        est += f.estimate;
        os += f.one_step;
    }
    EXPECT_DOUBLE_EQ(r.score, s / 5);
    EXPECT_DOUBLE_EQ(r.sigma2, v / 5);
    EXPECT_DOUBLE_EQ(r.information, info / 5);
    EXPECT_DOUBLE_EQ(r.estimate, est / 5);
    EXPECT_DOUBLE_EQ(r.one_step, os / 5);
    EXPECT_DOUBLE_EQ(r.z_signed, std::sqrt(500.0) * r.score / std::sqrt(r.sigma2));
    EXPECT_DOUBLE_EQ(r.se, std::sqrt(r.sigma2) / (std::sqrt(500.0) * r.information));
    EXPECT_DOUBLE_EQ(r.ci_lo, r.one_step - 1.96 * r.se);
    EXPECT_THROW(pool_and_test({folds.front()}, 10, 0, 2), ValidationError);
}

TEST(Pool, DegenerateVariance)
{
    const auto nonzero = pool_and_test({part(0.1, 0.0, 1.0, 0, 0), part(0.1, 0.0, 1.0, 0, 0)}, 100, 0, 2);
    EXPECT_TRUE(nonzero.degenerate);
    EXPECT_EQ(nonzero.p_value, 0.0);
    const auto zero = pool_and_test({part(0.0, 0.0, 1.0, 0, 0), part(0.0, 0.0, 1.0, 0, 0)}, 100, 0, 2);
    EXPECT_TRUE(zero.degenerate);
    EXPECT_EQ(zero.p_value, 1.0);
}

TEST(Pool, WaldDuality)
{
    for (std::uint64_t s = 0; s < 500; ++s) {
        const Vector u = uniform(6, -1.0, 1.0, 1000 + s);
        std::vector<SplitScore> folds{part(u(0) * 0.1, 0.1 + std::abs(u(1)), 0.5 + std::abs(u(2)), 0, u(3) * 0.3),
                                      part(u(4) * 0.1, 0.1 + std::abs(u(5)), 0.7, 0, u(0) * 0.3)};
        const auto r = pool_and_test(folds, 200, 0, 2);
        const bool excludes = r.ci_lo > 0.0 || r.ci_hi < 0.0;
        const double wald = std::sqrt(200.0) * std::abs(r.one_step) * r.information / std::sqrt(r.sigma2);
        if (excludes) {
            EXPECT_GT(wald, 1.96);
        }
        EXPECT_LE(r.ci_lo, r.ci_hi);
        EXPECT_GE(r.p_value, 0.0);
        EXPECT_LE(r.p_value, 1.0);
    }
}

TEST(Score, ZeroAndSymmetricWeights)
{
    const Matrix x = gaussian(30, 4, 10);
    const Vector beta = gaussian(4, 1, 11).col(0);
    const Vector w = gaussian(3, 1, 12).col(0);
    const SurrogateLoss<> zero(x, Vector::Zero(30), Vector::Zero(30));
    EXPECT_EQ(split_score(zero, beta, w, 1), 0.0);
    EXPECT_EQ(split_variance(zero, beta, w, 1), 0.0);
    const SurrogateLoss<> sym(x, Vector::Constant(30, 1.7), Vector::Constant(30, 1.7));
    EXPECT_EQ(split_score(sym, Vector::Zero(4), w, 2), 0.0);
}

TEST(Score, HandComputedThreeObservations)
{
    Matrix x(3, 2);
    x << 1.0, 2.0, -0.5, 1.0, 2.0, -1.0;
    Vector plus(3), minus(3);
    plus << 1.0, 0.0, 2.0;
    minus << 0.5, 3.0, 0.0;
    Vector beta(2);
    beta << 0.3, -0.2;
    Vector w(1);
    w << 0.4;
    const SurrogateLoss<> loss(x, plus, minus);

    // Coordinate 0: residual x0 - 0.4 x1; predictor 0.3 x0 - 0.2 x1.
    double s = 0.0, v = 0.0, info = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double t = 0.3 * x(i, 0) - 0.2 * x(i, 1);
        const double g = plus(i) * phi_prime(t) - minus(i) * phi_prime(-t);
        const double e = 1.0 / (1.0 + std::exp(-t));
        const double h = (plus(i) + minus(i)) * e * (1.0 - e);
        const double r = x(i, 0) - 0.4 * x(i, 1);
        s += g * r;
        v += g * g * r * r;
        info += h * x(i, 0) * r;
    }
    EXPECT_NEAR(split_score(loss, beta, w, 0), s / 3, 1e-12);
    EXPECT_NEAR(split_variance(loss, beta, w, 0), v / 3, 1e-12);
    EXPECT_NEAR(partial_information(loss, beta, w, 0), info / 3, 1e-12);
}

TEST(Score, VarianceArithmetic)
{
    Matrix x(1, 2);
    x << 3.0, 5.0;
    const CallbackLoss loss(
        x, [](Index, double) { return 0.0; }, [](Index, double) { return 2.0; }, [](Index, double) { return 1.0; });
    EXPECT_DOUBLE_EQ(split_variance(loss, Vector::Zero(2), Vector::Zero(1), 0), 36.0);
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const Matrix xs = gaussian(5, 3, 2000 + s);
        const SurrogateLoss<> l(xs, uniform(5, 0, 2, 3000 + s), uniform(5, 0, 2, 4000 + s));
        EXPECT_GE(split_variance(l, gaussian(3, 1, 5000 + s).col(0), gaussian(2, 1, 6000 + s).col(0), 1), 0.0);
    }
}

TEST(Projection, MatchesWeightedNormalEquations)
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Matrix x = gaussian(40, 3, 100 + s);
        const SurrogateLoss<> loss(x, uniform(40, 0.1, 2.0, 200 + s), uniform(40, 0.1, 2.0, 300 + s));
        const Vector beta = 0.5 * gaussian(3, 1, 400 + s).col(0);
        const Index j = static_cast<Index>(s % 3);
        const auto fit = fit_w(loss, beta, j, fixed(0.0), {}, SeedStream(1));
        Vector h(40);
        const Vector eta = x * beta;
        for (Index i = 0; i < 40; ++i)
            h(i) = loss.curvature(i, eta(i));
        const Vector expected = oracle::weighted_least_squares(detail::drop_column(x, j), x.col(j), h);
        EXPECT_LE((fit.w - expected).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Projection, ConstantWeightsAreUnweightedLasso)
{
    const Matrix x = gaussian(200, 6, 20);
    // Omega+ + Omega- = 4 at beta = 0 gives curvature 4 * 0.25 = 1 everywhere.
    const Vector plus = uniform(200, 0.0, 4.0, 21);
    const SurrogateLoss<> loss(x, plus, Vector::Constant(200, 4.0) - plus);
    const auto fit = fit_w(loss, Vector::Zero(6), 2, fixed(0.05), {}, SeedStream(1));
    const auto lasso = weighted_lasso_ls(detail::drop_column(x, 2), x.col(2), Vector::Ones(200), 0.05);
    EXPECT_LE((fit.w - lasso.coef).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Projection, IndependentDesignGivesNearZero)
{
    const Matrix x = gaussian(3000, 5, 30);
    const SurrogateLoss<> loss(x, uniform(3000, 0.0, 2.0, 31), uniform(3000, 0.0, 2.0, 32));
    const auto fit = fit_w(loss, Vector::Zero(5), 0, LambdaPolicy{}, {}, SeedStream(33));
    EXPECT_LE(fit.w.cwiseAbs().maxCoeff(), 0.05);
    EXPECT_THROW(fit_w(SurrogateLoss<>(x, Vector::Zero(3000), Vector::Zero(3000)), Vector::Zero(5), 0,
                       LambdaPolicy{}, {}, SeedStream(1)),
                 NumericalError);
}

TEST(Coordinate, IllConditionedInformation)
{
    Matrix x = gaussian(60, 3, 40);
    x.col(1).setZero();
    const SurrogateLoss<> loss(x, uniform(60, 0.0, 2.0, 41), uniform(60, 0.0, 2.0, 42));
    std::vector<FoldProblem<SurrogateLoss<>>> folds{{loss, Vector::Zero(3), {}}, {loss, Vector::Zero(3), {}}};
    EXPECT_THROW(test_coordinate(folds, 1, InferenceOptions{}, SeedStream(1)), NumericalError);
    EXPECT_THROW(test_coordinate(folds, 3, InferenceOptions{}, SeedStream(1)), ValidationError);
}

TEST(Coordinate, VarianceAtNullSwitch)
{
    const Matrix x = gaussian(100, 3, 50);
    const SurrogateLoss<> loss(x, uniform(100, 0.0, 2.0, 51), uniform(100, 0.0, 2.0, 52));
    Vector beta(3);
    beta << 0.8, -0.3, 0.1;
    InferenceOptions opts;
    opts.lambda_w = fixed(0.01);
    const auto full = split_fold(loss, beta, 0, opts, SeedStream(1));
    opts.variance_at_null = true;
    const auto null = split_fold(loss, beta, 0, opts, SeedStream(1));
    EXPECT_EQ(full.score, null.score);
    EXPECT_NE(full.variance, null.variance);
    EXPECT_DOUBLE_EQ(null.variance, split_variance(loss, full.beta_null, full.w, 0));
    EXPECT_EQ(full.beta_null(0), 0.0);
    EXPECT_EQ(full.beta_null.tail(2), beta.tail(2));
}

TEST(Coordinate, ReindexingInvariance)
{
    ScenarioSpec spec;
    spec.n = 300;
    spec.p = 10;
    const Dataset data = gen_scenario(spec, SeedStream(60)).data;
    const Index j = 6;
    Matrix swapped = data.x();
    swapped.col(0).swap(swapped.col(j));
    const Dataset other = data.with_covariates(swapped);
    PearlConfig cfg;
    // Cross-validation folds for the projection are seeded per coordinate.
    cfg.lambda_w = fixed(0.02);
    const auto a = test_coordinate(data, j, 3, cfg, SeedStream(61));
    const auto b = test_coordinate(other, 0, 3, cfg, SeedStream(61));
    // Only the coordinate order of floating-point sums differs.
    EXPECT_NEAR(a.score, b.score, 1e-9);
    EXPECT_NEAR(a.sigma2, b.sigma2, 1e-9);
    EXPECT_NEAR(a.p_value, b.p_value, 1e-6);
    EXPECT_NEAR(a.one_step, b.one_step, 1e-6);
    EXPECT_NEAR(a.ci_lo, b.ci_lo, 1e-6);
    EXPECT_EQ(a.coordinate, 7);
    EXPECT_EQ(b.coordinate, 1);
}
