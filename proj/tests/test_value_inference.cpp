#include "test_util.hpp"

#include <pearl/scenario.hpp>
#include <pearl/simulation.hpp>
#include <pearl/value_inference.hpp>

#include <gtest/gtest.h>

#include <numbers>

using namespace pearl;
using pearl::testing::constant_outcome;
using pearl::testing::constant_propensity;

namespace {

Dataset scenario_data(Index n, Index p, std::uint64_t seed, int scenario = 1)
{
    ScenarioSpec spec;
    spec.scenario = scenario;
    spec.n = n;
    spec.p = p;
    return gen_scenario(spec, SeedStream(seed)).data;
}

} // namespace

TEST(ValueReport, IntervalArithmetic)
{
    const double a = std::sqrt(0.25 * 99.0 / 100.0);
    Vector terms(100);
    for (Index i = 0; i < 100; ++i)
        terms(i) = 0.8 + (i % 2 == 0 ? a : -a);
    const auto r = summarize_value_terms(terms, {});
    EXPECT_NEAR(r.value, 0.8, 1e-14);
    EXPECT_NEAR(r.sd, 0.5, 1e-14);
    EXPECT_NEAR(r.ci_lo, 0.702, 1e-12);
    EXPECT_NEAR(r.ci_hi, 0.898, 1e-12);
    EXPECT_EQ(r.n_eval, 100);
    EXPECT_DOUBLE_EQ(r.ci_lo, r.value - 1.96 * r.se);
    EXPECT_THROW(summarize_value_terms(Vector{}, {}), ValidationError);
}

TEST(ValueReport, ReducesToInverseProbabilityWeighting)
{
    const Dataset data = scenario_data(200, 8, 1);
    const DecisionRule always{Vector::Zero(8)};
    const auto terms = value_terms(data, always, constant_propensity(0.4, 8), constant_outcome(0.0, 0.0, 8));
    double ipw = 0.0;
    for (Index i = 0; i < data.n(); ++i)
        ipw += data.a()(i) == 1 ? data.y()(i) / 0.4 : 0.0;
    EXPECT_NEAR(terms.mean(), ipw / 200.0, 1e-12);
}

TEST(InferValue, EvaluationHalfIsHeldOut)
{
    const Dataset data = scenario_data(400, 10, 2);
    PearlConfig cfg;
    const SeedStream seed(3);
    const auto base = infer_value(data, 3, cfg, 0.5, seed);
    EXPECT_EQ(base.n_eval, 200);

    const auto halves = split_half(400, 0.5, seed.derive("value-split"));
    Vector y = data.y();
    for (Index i : halves.second)
        y(i) = -3.0 * y(i) + 1.0;
    const auto mutated = infer_value(data.with_outcomes(y), 3, cfg, 0.5, seed);
    EXPECT_EQ(base.rule.beta, mutated.rule.beta);
    EXPECT_NE(base.value, mutated.value);

    // The estimate is the AIPW value on the second half with first-half nuisances.
    const Dataset train = data.subset(halves.first);
    const auto propensity = fit_propensity(train, cfg.nuisance, seed.derive("propensity"));
    const auto outcome = fit_outcome(train, cfg.nuisance, seed.derive("outcome"));
    EXPECT_NEAR(base.value, value_estimate(data, halves.second, base.rule, propensity, outcome), 1e-12);
    EXPECT_EQ(base.rule.beta, fit_all(train, 3, cfg, seed.derive("rule")).pooled);
}

TEST(InferValue, WidthShrinksWithEvaluationSize)
{
    ScenarioSpec spec;
    spec.p = 8;
    PearlConfig cfg;
    cfg.nuisance = oracle_nuisance(spec);
    cfg.lambda.mode = LambdaPolicy::Mode::fixed;
    cfg.lambda.fixed = 0.02;
    double widths[2];
    const Index sizes[2] = {800, 3200};
    for (int s = 0; s < 2; ++s) {
        double w = 0.0;
        for (int r = 0; r < 5; ++r) {
            const auto rep = infer_value(scenario_data(sizes[s], 8, 10 + r), 2, cfg, 0.5, SeedStream(r));
            w += rep.ci_hi - rep.ci_lo;
        }
        widths[s] = w / 5;
    }
    EXPECT_NEAR(widths[1] / widths[0], 0.5, 0.1);
}

TEST(InferValue, NeedsBothArmsInTraining)
{
    Matrix x = Matrix::Random(20, 8);
    Eigen::VectorXi a = Eigen::VectorXi::Ones(20);
    a(0) = -1;
    const Dataset data(x, a, Vector::Zero(20));
    SplitHalves halves;
    for (Index i = 0; i < 20; ++i)
        (i < 10 ? halves.second : halves.first).push_back(i);
    const RuleFitter trivial = [](const Dataset& d, const SeedStream&) { return DecisionRule{Vector::Zero(d.p())}; };
    EXPECT_THROW(infer_value_with(data, halves, trivial, {}, SeedStream(1)), ValidationError);
}

TEST(Oracle, ZeroEffectScenario)
{
    ScenarioSpec spec;
    spec.p = 10;
    spec.xi = 0.0;
    const DecisionRule rule{Vector::LinSpaced(10, -1.0, 2.0)};
    EXPECT_EQ(scenario1_value(spec, rule), 0.0);
    const auto mc = true_value_oracle(spec, rule, 200000, SeedStream(1));
    EXPECT_LE(std::abs(mc.value), 3.0 * mc.se);
}

TEST(Oracle, RuleAndNegationSumToTwiceMainEffect)
{
    for (int scenario : {1, 2}) {
        ScenarioSpec spec;
        spec.scenario = scenario;
        spec.p = 12;
        const DecisionRule rule{Vector::LinSpaced(12, 1.0, -0.5)};
        const auto a = true_value_oracle(spec, rule, 400000, SeedStream(2));
        const auto b = true_value_oracle(spec, rule.negated(), 400000, SeedStream(2));
        const double se = std::hypot(a.se, b.se);
        EXPECT_LE(std::abs(a.value + b.value - 2.0 * spec.mean_main_effect()), 3.0 * se) << scenario;
    }
}

TEST(Oracle, OptimalRuleScenarioOne)
{
    ScenarioSpec spec;
    spec.p = 100;
    spec.xi = 0.7;
    const DecisionRule opt{spec.beta_opt()};
    const auto mc = true_value_oracle(spec, opt, 2000000, SeedStream(3));
    EXPECT_LE(mc.se, 1e-3);
    const double closed = std::sqrt(2.0 / std::numbers::pi) * spec.xi * spec.beta_opt().norm();
    EXPECT_LE(std::abs(mc.value - closed), 3.0 * mc.se);
    EXPECT_NEAR(scenario_value(spec, opt, 10, SeedStream(0)), closed, 1e-12);
}

TEST(Oracle, ValidatesInput)
{
    ScenarioSpec spec;
    EXPECT_THROW(true_value_oracle(spec, DecisionRule{Vector::Zero(3)}, 100, SeedStream(1)), ValidationError);
    EXPECT_THROW(true_value_oracle(spec, DecisionRule{Vector::Zero(spec.p)}, 1, SeedStream(1)), ValidationError);
    spec.scenario = 2;
    EXPECT_THROW(scenario1_value(spec, DecisionRule{Vector::Zero(spec.p)}), ValidationError);
}
