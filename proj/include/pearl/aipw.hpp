#pragma once

#include <pearl/dataset.hpp>
#include <pearl/error.hpp>
#include <pearl/nuisance.hpp>

#include <algorithm>
#include <span>
#include <utility>

namespace pearl {

/// Linear rule D(x) = sgn(x' beta + offset) with sgn(0) = +1. The offset is
/// zero for the estimator's rules; regression baselines may carry one.
struct DecisionRule {
    Vector beta;
    double offset = 0.0;

    int operator()(const Eigen::Ref<const Vector>& x) const
    {
        if (x.size() != beta.size())
            throw ValidationError("decision rule: covariate dimension mismatch");
        return x.dot(beta) + offset >= 0.0 ? 1 : -1;
    }

    DecisionRule negated() const { return {-beta, -offset}; }
};

/// Per-observation AIPW weights and their split into the weight favouring
/// A = +1 (omega_plus) and the one favouring A = -1 (omega_minus).
struct AipwWeights {
    Vector treated;     ///< W_1
    Vector control;     ///< W_{-1}
    Vector omega_plus;  ///< W_{1,+} + W_{-1,-}
    Vector omega_minus; ///< W_{1,-} + W_{-1,+}

    Index size() const noexcept { return treated.size(); }
    AipwWeights subset(std::span<const Index> rows) const;
};

struct WeightPair {
    double treated = 0.0;
    double control = 0.0;
};

struct OmegaPair {
    double plus = 0.0;
    double minus = 0.0;
};

/// W_a = Y 1{A=a}/pi(a;x) - (1{A=a} - pi(a;x)) Q(a;x)/pi(a;x), for a = +1 and a = -1.
inline WeightPair compute_weights(const Observation& obs, const PropensityModel& propensity,
                                  const OutcomeModel& outcome)
{
    WeightPair w;
    for (int a : {1, -1}) {
        const double pi = propensity.predict(a, obs.x);
        const double q = outcome.predict(a, obs.x);
        const double ind = obs.a == a ? 1.0 : 0.0;
        const double value = obs.y * ind / pi - (ind - pi) * q / pi;
        (a == 1 ? w.treated : w.control) = value;
    }
    return w;
}

inline OmegaPair decompose(double treated, double control)
{
    return {std::max(treated, 0.0) + std::max(-control, 0.0), std::max(-treated, 0.0) + std::max(control, 0.0)};
}

inline AipwWeights make_weights(Vector treated, Vector control)
{
    if (treated.size() != control.size())
        throw ValidationError("AIPW weights: length mismatch");
    AipwWeights w;
    w.omega_plus.resize(treated.size());
    w.omega_minus.resize(treated.size());
    for (Index i = 0; i < treated.size(); ++i) {
        const auto o = decompose(treated(i), control(i));
        w.omega_plus(i) = o.plus;
        w.omega_minus(i) = o.minus;
    }
    w.treated = std::move(treated);
    w.control = std::move(control);
    return w;
}

inline AipwWeights AipwWeights::subset(std::span<const Index> rows) const
{
    Vector t(static_cast<Index>(rows.size())), c(t.size());
    for (Index r = 0; r < t.size(); ++r) {
        t(r) = treated(rows[static_cast<std::size_t>(r)]);
        c(r) = control(rows[static_cast<std::size_t>(r)]);
    }
    return make_weights(std::move(t), std::move(c));
}

/// Weights for every observation of `data`.
inline AipwWeights compute_weights(const Dataset& data, const PropensityModel& propensity,
                                   const OutcomeModel& outcome)
{
    Vector t(data.n()), c(data.n());
    for (Index i = 0; i < data.n(); ++i) {
        const auto w = compute_weights(data.observation(i), propensity, outcome);
        t(i) = w.treated;
        c(i) = w.control;
    }
    return make_weights(std::move(t), std::move(c));
}

/// AIPW value E_n[W_1 1{D=1} + W_{-1} 1{D=-1}].
inline double value_estimate(const AipwWeights& weights, const Matrix& x, const DecisionRule& rule)
{
    if (weights.size() != x.rows())
        throw ValidationError("value_estimate: weights and covariates differ in length");
    if (x.rows() == 0)
        throw ValidationError("value_estimate: empty sample");
    double sum = 0.0;
    for (Index i = 0; i < x.rows(); ++i)
        sum += rule(x.row(i).transpose()) == 1 ? weights.treated(i) : weights.control(i);
    return sum / static_cast<double>(x.rows());
}

inline double value_estimate(const Dataset& data, std::span<const Index> rows, const DecisionRule& rule,
                             const PropensityModel& propensity, const OutcomeModel& outcome)
{
    if (rows.empty())
        throw ValidationError("value_estimate: empty subset");
    const Dataset part = data.subset(rows);
    return value_estimate(compute_weights(part, propensity, outcome), part.x(), rule);
}

/// The weighted misclassification objective E_n[Om+ 1{D != 1} + Om- 1{D != -1}].
inline double zero_one_loss(const AipwWeights& weights, const Matrix& x, const DecisionRule& rule)
{
    if (weights.size() != x.rows() || x.rows() == 0)
        throw ValidationError("zero_one_loss: bad input sizes");
    double sum = 0.0;
    for (Index i = 0; i < x.rows(); ++i)
        sum += rule(x.row(i).transpose()) == 1 ? weights.omega_minus(i) : weights.omega_plus(i);
    return sum / static_cast<double>(x.rows());
}

} // namespace pearl
