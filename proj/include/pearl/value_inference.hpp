#pragma once

#include <pearl/aipw.hpp>
#include <pearl/dataset.hpp>
#include <pearl/error.hpp>
#include <pearl/estimator.hpp>
#include <pearl/folds.hpp>
#include <pearl/inference.hpp>
#include <pearl/nuisance.hpp>
#include <pearl/seed.hpp>

#include <cmath>
#include <functional>

namespace pearl {

struct ValueReport {
    double value = 0.0;  ///< AIPW value of the fitted rule on the evaluation half
    double sd = 0.0;     ///< sample standard deviation of the per-observation terms
    double se = 0.0;     ///< sd / sqrt(n_eval)
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    Index n_eval = 0;
    DecisionRule rule;
};

/// Mean, (n-1)-denominator standard deviation and 95% interval of the terms.
inline ValueReport summarize_value_terms(const Vector& terms, DecisionRule rule)
{
    if (terms.size() == 0)
        throw ValidationError("value inference: empty evaluation set");
    ValueReport r;
    r.n_eval = terms.size();
    r.value = terms.mean();
    const double n2 = static_cast<double>(terms.size());
    r.sd = terms.size() > 1 ? std::sqrt((terms.array() - r.value).square().sum() / (n2 - 1.0)) : 0.0;
    r.se = r.sd / std::sqrt(n2);
    r.ci_lo = r.value - kNormalQuantile975 * r.se;
    r.ci_hi = r.value + kNormalQuantile975 * r.se;
    r.rule = std::move(rule);
    return r;
}

/// Per-observation terms W_{D(X)} on `eval` with nuisances fitted elsewhere.
inline Vector value_terms(const Dataset& eval, const DecisionRule& rule, const PropensityModel& propensity,
                          const OutcomeModel& outcome)
{
    const auto w = compute_weights(eval, propensity, outcome);
    Vector terms(eval.n());
    for (Index i = 0; i < eval.n(); ++i)
        terms(i) = rule(eval.x().row(i).transpose()) == 1 ? w.treated(i) : w.control(i);
    return terms;
}

using RuleFitter = std::function<DecisionRule(const Dataset& train, const SeedStream& seed)>;

/// Single-split value inference: the rule and the nuisances are fitted on the
/// first half only, the value and its variance are estimated on the second.
inline ValueReport infer_value_with(const Dataset& data, const SplitHalves& halves, const RuleFitter& fit_rule,
                                    const NuisanceConfig& nuisance, const SeedStream& seed)
{
    const Dataset train = data.subset(halves.first);
    const Dataset eval = data.subset(halves.second);
    if (!train.has_both_arms())
        throw ValidationError("value inference: training half lacks a treatment arm");
    const DecisionRule rule = fit_rule(train, seed.derive("rule"));
    const auto propensity = fit_propensity(train, nuisance, seed.derive("propensity"));
    const auto outcome = fit_outcome(train, nuisance, seed.derive("outcome"));
    return summarize_value_terms(value_terms(eval, rule, propensity, outcome), rule);
}

inline ValueReport infer_value(const Dataset& data, int K, const PearlConfig& config, double split_fraction,
                               const SeedStream& seed)
{
    const auto halves = split_half(data.n(), split_fraction, seed.derive("value-split"));
    const RuleFitter pearl_rule = [&](const Dataset& train, const SeedStream& s) {
        return DecisionRule{fit_all(train, K, config, s).pooled};
    };
    return infer_value_with(data, halves, pearl_rule, config.nuisance, seed);
}

} // namespace pearl
