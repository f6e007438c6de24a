#include "oracles.hpp"
#include "test_util.hpp"

#include <pearl/estimator.hpp>
#include <pearl/l1_solver.hpp>
#include <pearl/nuisance.hpp>

#include <gtest/gtest.h>

using namespace pearl;
using pearl::testing::gaussian;
using pearl::testing::uniform;

namespace {

LogisticLoss random_logistic(Index m, Index p, std::uint64_t seed)
{
    Matrix x = gaussian(m, p, seed);
    Vector labels = uniform(m, -1.0, 1.0, seed + 1).unaryExpr([](double u) { return u >= 0.0 ? 1.0 : -1.0; });
    Vector w = uniform(m, 0.2, 2.0, seed + 2);
    return {x, labels, w};
}

WeightedSquaredLoss random_linear(Index m, Index p, std::uint64_t seed, double signal = 1.0)
{
    Matrix x = gaussian(m, p, seed);
    Vector beta = Vector::Zero(p);
    beta.head(std::min<Index>(3, p)).setConstant(signal);
    Vector y = x * beta + gaussian(m, 1, seed + 1).col(0);
    return {x, y, uniform(m, 0.5, 1.5, seed + 2)};
}

} // namespace

TEST(Solver, SoftThresholdClosedForm)
{
    Matrix x(1, 1);
    x << 1.0;
    Vector y(1);
    y << 1.0;
    // Half-squared loss gives the plain soft threshold 1 - 0.3.
    Vector half(1);
    half << 0.5;
    EXPECT_NEAR(solve_l1(WeightedSquaredLoss(x, y, half), 0.3).coef(0), 0.7, 1e-9);
    // Unscaled (y - theta)^2 thresholds at lambda / 2.
    EXPECT_NEAR(solve_l1(WeightedSquaredLoss(x, y), 0.3).coef(0), 0.85, 1e-9);
    EXPECT_EQ(solve_l1(WeightedSquaredLoss(x, y, half), 1.5).coef(0), 0.0);
}

TEST(Solver, SymmetricSurrogateIsZero)
{
    Matrix x(1, 1);
    x << 1.0;
    const SurrogateLoss<> loss(x, Vector::Ones(1), Vector::Ones(1));
    EXPECT_NEAR(solve_l1(loss, 0.0).coef(0), 0.0, 1e-9);

    // Unequal weights: the stationary point is log(plus / minus).
    const SurrogateLoss<> tilted(x, Vector::Constant(1, 3.0), Vector::Constant(1, 1.0));
    EXPECT_NEAR(solve_l1(tilted, 0.0).coef(0), std::log(3.0), 1e-7);
}

TEST(Solver, MatchesGridSearch)
{
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto loss = random_logistic(20, 2, 100 + 10 * s);
        const double lambda = 0.1;
        const auto sol = solve_l1(loss, lambda);
        oracle::GridSearch grid([&](const Vector& t) { return penalized_objective(loss, t, lambda); }, 2);
        const double best = grid.minimum();
        ASSERT_LT(sol.coef.cwiseAbs().maxCoeff(), 2.0);
        EXPECT_LE(sol.objective, best + 1e-12);
        EXPECT_NEAR(sol.objective, best, 1e-6) << "seed " << s;
    }
}

TEST(Solver, KktAndMonotoneTrace)
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        SolverOptions opts;
        opts.record_trace = true;
        const auto logistic = random_logistic(80, 30, 500 + s);
        const auto a = solve_l1(logistic, 0.02, opts);
        EXPECT_LE(kkt_residual(logistic, a.coef, 0.02), opts.tolerance);
        for (std::size_t i = 1; i < a.objective_trace.size(); ++i)
            EXPECT_LE(a.objective_trace[i], a.objective_trace[i - 1] * (1 + 1e-14) + 1e-15);

        const auto linear = random_linear(60, 120, 700 + s);
        const auto b = solve_l1(linear, 0.05, opts);
        EXPECT_LE(kkt_residual(linear, b.coef, 0.05), opts.tolerance);
        for (std::size_t i = 1; i < b.objective_trace.size(); ++i)
            EXPECT_LE(b.objective_trace[i], b.objective_trace[i - 1] * (1 + 1e-14) + 1e-15);
    }
}

TEST(Solver, DerivativesMatchFiniteDifferences)
{
    const auto logistic = random_logistic(100, 1, 11);
    const auto linear = random_linear(100, 1, 12);
    const SurrogateLoss<> surrogate(Matrix::Ones(100, 1), uniform(100, 0.0, 3.0, 13), uniform(100, 0.0, 3.0, 14));
    const Vector ts = uniform(100, -4.0, 4.0, 15);
    const double h = 1e-5;
    auto check = [&](const auto& loss) {
        for (Index i = 0; i < 100; ++i) {
            const double t = ts(i);
            const double fd = (loss.value(i, t + h) - loss.value(i, t - h)) / (2 * h);
            const double d = loss.derivative(i, t);
            EXPECT_LE(std::abs(fd - d), 1e-5 * std::max(1.0, std::abs(d)));
            const double fd2 = (loss.derivative(i, t + h) - loss.derivative(i, t - h)) / (2 * h);
            const double c = loss.curvature(i, t);
            EXPECT_LE(std::abs(fd2 - c), 1e-5 * std::max(1.0, std::abs(c)));
        }
    };
    check(logistic);
    check(linear);
    check(surrogate);
}

TEST(Solver, WeightAndLambdaScalingInvariance)
{
    const auto base = random_logistic(60, 8, 31);
    const auto sol = solve_l1(base, 0.03);
    Vector w = uniform(60, 0.2, 2.0, 33) * 4.0;
    Matrix x = gaussian(60, 8, 31);
    Vector labels = uniform(60, -1.0, 1.0, 32).unaryExpr([](double u) { return u >= 0.0 ? 1.0 : -1.0; });
    const LogisticLoss scaled(x, labels, w);
    const auto sol4 = solve_l1(scaled, 0.12);
    EXPECT_LE((sol.coef - sol4.coef).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Solver, UnpenalizedCoordinatesAndLambdaMax)
{
    auto loss = random_linear(100, 6, 41);
    SolverOptions opts;
    opts.penalty_factors = Vector::Ones(6);
    opts.penalty_factors(0) = 0.0;
    const double top = lambda_max(loss, opts);
    const auto at_top = solve_l1(loss, top * 1.0001, opts);
    EXPECT_NE(at_top.coef(0), 0.0);
    EXPECT_EQ(at_top.coef.tail(5).cwiseAbs().maxCoeff(), 0.0);
    const auto below = solve_l1(loss, top * 0.9, opts);
    EXPECT_GT(below.coef.tail(5).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Solver, ReportsNonConvergence)
{
    const auto loss = random_logistic(80, 40, 51);
    SolverOptions opts;
    opts.max_iterations = 1;
    try {
        solve_l1(loss, 1e-3, opts);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_EQ(e.last_iterate().size(), 40);
        EXPECT_GT(e.kkt_residual(), opts.tolerance);
    }
    EXPECT_THROW(solve_l1(loss, -1.0), ValidationError);
}

TEST(CrossValidation, NoiseSelectsLargeLambda)
{
    Matrix x = gaussian(200, 10, 61);
    Vector y = gaussian(200, 1, 62).col(0);
    const WeightedSquaredLoss loss(x, y);
    const auto path = make_lambda_path(loss);
    const auto folds = make_folds(200, 5, SeedStream(63));
    const auto cv = cv_lambda(loss, path, folds);
    EXPECT_LE(cv.index, 15u);
    EXPECT_EQ(cv.curve.size(), 50u);
    const auto again = cv_lambda(loss, path, folds);
    EXPECT_EQ(cv.lambda, again.lambda);
    EXPECT_EQ(cv.curve, again.curve);
}

TEST(CrossValidation, StrongSignalIsSelected)
{
    Matrix x = gaussian(200, 30, 71);
    Vector y = 2.0 * x.col(4) + gaussian(200, 1, 72).col(0);
    const WeightedSquaredLoss loss(x, y);
    const auto fit = fit_cv(loss, {}, SeedStream(73));
    EXPECT_NE(fit.solution.coef(4), 0.0);
    EXPECT_NEAR(fit.solution.coef(4), 2.0, 0.3);
    const auto again = fit_cv(loss, {}, SeedStream(73));
    EXPECT_EQ(fit.cv.lambda, again.cv.lambda);
    EXPECT_EQ(fit.solution.coef, again.solution.coef);
}

TEST(CrossValidation, TiesGoToLargerLambda)
{
    // A constant response makes every grid value fit the null model equally.
    Matrix x = gaussian(50, 3, 81);
    const WeightedSquaredLoss loss(x, Vector::Zero(50));
    LambdaPath path;
    path.lambdas = {1.0, 0.5, 0.25};
    const auto cv = cv_lambda(loss, path, make_folds(50, 5, SeedStream(82)));
    EXPECT_EQ(cv.index, 0u);
    LambdaPath bad;
    bad.lambdas = {0.5, 1.0};
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(WeightedLasso, IndependentTargetGivesZero)
{
    Matrix x = gaussian(2000, 5, 91);
    Vector t = gaussian(2000, 1, 92).col(0);
    const auto sol = weighted_lasso_ls(x, t, Vector::Ones(2000), 0.2);
    EXPECT_EQ(sol.coef.cwiseAbs().maxCoeff(), 0.0);
}

TEST(WeightedLasso, OrdinaryLeastSquaresAtZeroLambda)
{
    for (std::uint64_t s = 0; s < 5; ++s) {
        Matrix x = gaussian(40, 4, 100 + s);
        Vector t = gaussian(40, 1, 200 + s).col(0);
        Vector h = uniform(40, 0.1, 3.0, 300 + s);
        const auto sol = weighted_lasso_ls(x, t, h, 0.0);
        EXPECT_LE((sol.coef - oracle::weighted_least_squares(x, t, h)).cwiseAbs().maxCoeff(), 1e-8);
        const auto plain = weighted_lasso_ls(x, t, Vector::Ones(40), 0.0);
        EXPECT_LE((plain.coef - oracle::weighted_least_squares(x, t, Vector::Ones(40))).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(WeightedLasso, PerfectCopy)
{
    Matrix x = gaussian(300, 6, 111);
    const Vector t = x.col(0);
    const auto sol = weighted_lasso_ls(x, t, Vector::Ones(300), 1e-3);
    EXPECT_NEAR(sol.coef(0), 1.0, 0.01);
    EXPECT_LE(sol.coef.tail(5).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_THROW(weighted_lasso_ls(x, t, Vector::Zero(300), 0.1), ValidationError);
    EXPECT_THROW(weighted_lasso_ls(x, t, -Vector::Ones(300), 0.1), ValidationError);
}
