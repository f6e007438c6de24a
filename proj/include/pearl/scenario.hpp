#pragma once

#include <pearl/aipw.hpp>
#include <pearl/dataset.hpp>
#include <pearl/error.hpp>
#include <pearl/inference.hpp>
#include <pearl/seed.hpp>
#include <pearl/surrogate.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace pearl {

/// The two simulation designs. X ~ N(0, I_p), Y = A Delta(X) + S(X) + eps with
/// eps ~ N(0, 1); every truth function depends on the first four covariates only.
struct ScenarioSpec {
    int scenario = 1; ///< 1 or 2
    Index n = 400;
    Index p = 100;
    double xi = 0.7;

    void validate() const
    {
        if (scenario != 1 && scenario != 2)
            throw ValidationError("scenario must be 1 or 2");
        if (p < 8)
            throw ValidationError("scenario dimension p must be at least 8");
        if (n < 1)
            throw ValidationError("scenario sample size must be positive");
        if (!(xi >= 0.0 && xi <= 1.0))
            throw ValidationError("xi must lie in [0, 1]");
    }

    Vector beta_opt() const { return padded({1.0, 1.0, -1.0, -1.0}); }
    Vector beta_main() const { return padded({-1.0, -1.0, 1.0, -1.0}); }
    Vector beta_propensity() const { return padded({1.0, -1.0}); }

    /// Treatment contrast {Q(1;x) - Q(-1;x)} / 2.
    double delta(const Eigen::Ref<const Vector>& x) const
    {
        const double t = x(0) + x(1) - x(2) - x(3);
        if (scenario == 1)
            return xi * t;
        const double s = x(0) + x(1) + x(2) + x(3);
        return (normal_cdf(xi * t) - 0.5) * (2.0 * s * s + 2.0 * xi);
    }

    /// Main effect {Q(1;x) + Q(-1;x)} / 2.
    double main_effect(const Eigen::Ref<const Vector>& x) const
    {
        const double t = -x(0) - x(1) + x(2) - x(3);
        return scenario == 1 ? 0.4 * t : std::exp(0.4 * t);
    }

    /// pr(A = 1 | x).
    double propensity(const Eigen::Ref<const Vector>& x) const
    {
        if (scenario == 1)
            return expit(0.4 * (x(0) - x(1)));
        return expit(0.25 * (x(0) * x(0) + x(1) * x(1) + x(0) * x(1)));
    }

    double outcome_mean(int a, const Eigen::Ref<const Vector>& x) const
    {
        return main_effect(x) + static_cast<double>(a) * delta(x);
    }

    /// Closed-form E[S(X)]: 0 in scenario 1, exp(0.08 * ||beta_S||^2) = exp(0.32) in scenario 2.
    double mean_main_effect() const { return scenario == 1 ? 0.0 : std::exp(0.5 * 0.16 * 4.0); }

private:
    Vector padded(std::initializer_list<double> head) const
    {
        Vector v = Vector::Zero(p);
        Index k = 0;
        for (double h : head)
            v(k++) = h;
        return v;
    }
};

struct SimulatedData {
    Dataset data;
    ScenarioSpec spec;
};

inline SimulatedData gen_scenario(const ScenarioSpec& spec, const SeedStream& seed)
{
    spec.validate();
    auto engine = seed.engine();
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Matrix x(spec.n, spec.p);
    Eigen::VectorXi a(spec.n);
    Vector y(spec.n);
    Vector row(spec.p);
    for (Index i = 0; i < spec.n; ++i) {
        for (Index j = 0; j < spec.p; ++j)
            row(j) = normal(engine);
        a(i) = uniform(engine) < spec.propensity(row) ? 1 : -1;
        y(i) = spec.outcome_mean(a(i), row) + normal(engine);
        x.row(i) = row.transpose();
    }
    return {Dataset(std::move(x), std::move(a), std::move(y)), spec};
}

struct OracleValue {
    double value = 0.0;
    double se = 0.0;
};

/// Monte Carlo value V(D) = E[S(X) + Delta(X) D(X)] over m fresh covariate
/// draws. The rule only enters through x' beta, so each draw samples the four
/// covariates the truth uses plus one standard normal standing in for the
/// remaining coordinates' contribution ||beta_{5:p}|| Z; this has the same
/// distribution as a full p-dimensional draw.
inline OracleValue true_value_oracle(const ScenarioSpec& spec, const DecisionRule& rule, Index m,
                                     const SeedStream& seed)
{
    if (rule.beta.size() != spec.p)
        throw ValidationError("true_value_oracle: rule dimension differs from scenario dimension");
    if (m < 2)
        throw ValidationError("true_value_oracle: need at least two draws");
    const Vector head = rule.beta.head(4);
    const double tail_norm = spec.p > 4 ? rule.beta.tail(spec.p - 4).norm() : 0.0;
    auto engine = seed.engine();
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector x4(4);
    double sum = 0.0, sum_sq = 0.0;
    for (Index i = 0; i < m; ++i) {
        for (Index k = 0; k < 4; ++k)
            x4(k) = normal(engine);
        const double t = x4.dot(head) + tail_norm * normal(engine) + rule.offset;
        const double v = spec.main_effect(x4) + (t >= 0.0 ? 1.0 : -1.0) * spec.delta(x4);
        sum += v;
        sum_sq += v * v;
    }
    const double mm = static_cast<double>(m);
    const double mean = sum / mm;
    const double var = std::max(0.0, (sum_sq - mm * mean * mean) / (mm - 1.0));
    return {mean, std::sqrt(var / mm)};
}

/// Exact scenario-1 value: with U = X'beta_opt and T = X'b, E[U sgn(T + c)] =
/// (beta_opt'b / ||b||) * 2 phi(c / ||b||), so V = xi times that (E[S] = 0).
inline double scenario1_value(const ScenarioSpec& spec, const DecisionRule& rule)
{
    if (spec.scenario != 1)
        throw ValidationError("scenario1_value: closed form only exists for scenario 1");
    const double norm = rule.beta.norm();
    if (norm == 0.0)
        return 0.0;
    const double c = rule.offset / norm;
    const double density = std::exp(-0.5 * c * c) / std::sqrt(2.0 * std::numbers::pi);
    return spec.xi * spec.beta_opt().dot(rule.beta) / norm * 2.0 * density;
}

/// Population value of a rule: exact in scenario 1, Monte Carlo (m draws) in scenario 2.
inline double scenario_value(const ScenarioSpec& spec, const DecisionRule& rule, Index m, const SeedStream& seed)
{
    if (spec.scenario == 1)
        return scenario1_value(spec, rule);
    return true_value_oracle(spec, rule, m, seed).value;
}

} // namespace pearl
