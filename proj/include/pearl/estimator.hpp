#pragma once

#include <pearl/aipw.hpp>
#include <pearl/dataset.hpp>
#include <pearl/error.hpp>
#include <pearl/folds.hpp>
#include <pearl/l1_solver.hpp>
#include <pearl/nuisance.hpp>
#include <pearl/seed.hpp>
#include <pearl/surrogate.hpp>

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace pearl {

/// Surrogate relaxation of the weighted misclassification loss:
/// f_i(t) = Om+_i phi(t) + Om-_i phi(-t).
template <class Surrogate = LogisticSurrogate>
class SurrogateLoss {
public:
    SurrogateLoss(Matrix x, Vector omega_plus, Vector omega_minus, Surrogate phi = {})
        : x_(std::move(x)), plus_(std::move(omega_plus)), minus_(std::move(omega_minus)), phi_(std::move(phi))
    {
        if (plus_.size() != x_.rows() || minus_.size() != x_.rows())
            throw ValidationError("surrogate loss: size mismatch");
        if ((plus_.array() < 0.0).any() || (minus_.array() < 0.0).any())
            throw ValidationError("surrogate loss: negative omega weight");
    }

    Index rows() const noexcept { return x_.rows(); }
    const Matrix& features() const noexcept { return x_; }
    const Vector& omega_plus() const noexcept { return plus_; }
    const Vector& omega_minus() const noexcept { return minus_; }

    double value(Index i, double t) const { return plus_(i) * phi_.value(t) + minus_(i) * phi_.value(-t); }
    double derivative(Index i, double t) const
    {
        return plus_(i) * phi_.derivative(t) - minus_(i) * phi_.derivative(-t);
    }
    double curvature(Index i, double t) const
    {
        return plus_(i) * phi_.curvature(t) + minus_(i) * phi_.curvature(-t);
    }

    SurrogateLoss subset(std::span<const Index> rows) const
    {
        return {detail::take_rows(x_, rows), detail::take(plus_, rows), detail::take(minus_, rows), phi_};
    }

private:
    Matrix x_;
    Vector plus_, minus_;
    Surrogate phi_;
};

template <class Surrogate = LogisticSurrogate>
SurrogateLoss<Surrogate> assemble_loss(const Matrix& x, const AipwWeights& weights, Surrogate phi = {})
{
    return {x, weights.omega_plus, weights.omega_minus, std::move(phi)};
}

/// How a penalty level is chosen: by cross-validation on a log grid, or fixed.
struct LambdaPolicy {
    enum class Mode { cv, fixed };
    Mode mode = Mode::cv;
    double fixed = 0.0;
    int grid = 50;
    double ratio = 0.01;
    int cv_folds = 5;
};

/// Cross-validated or fixed-lambda fit of any smooth loss.
template <SmoothLoss L>
std::pair<Vector, double> fit_with_policy(const L& loss, const LambdaPolicy& policy, const SolverOptions& opts,
                                          const SeedStream& seed)
{
    if (policy.mode == LambdaPolicy::Mode::fixed)
        return {solve_l1(loss, policy.fixed, opts).coef, policy.fixed};
    const int folds = std::min<int>(policy.cv_folds, static_cast<int>(loss.rows()));
    auto fit = fit_cv(loss, opts, seed, policy.grid, policy.ratio, folds);
    return {std::move(fit.solution.coef), fit.cv.lambda};
}

struct PearlConfig {
    NuisanceConfig nuisance;
    LambdaPolicy lambda;       ///< for the rule coefficients
    LambdaPolicy lambda_w;     ///< for the projection direction in inference
    SolverOptions solver;
};

/// Everything produced for one held-out fold.
struct FoldFit {
    int fold = 0;
    IndexList rows;        ///< the fold's observations (ascending)
    AipwWeights weights;   ///< computed from nuisances fitted off the fold
    Vector beta;
    double lambda = 0.0;
    std::shared_ptr<const PropensityModel> propensity;
    std::shared_ptr<const OutcomeModel> outcome;
};

struct PearlFit {
    FoldPlan folds;
    std::vector<FoldFit> fold_fits;
    Vector pooled; ///< arithmetic mean of the fold coefficient vectors

    Index p() const noexcept { return pooled.size(); }
};

/// Fit nuisances off fold k, then minimize the penalized surrogate loss over fold k.
template <class Surrogate = LogisticSurrogate>
FoldFit fit_fold(int k, const Dataset& data, const FoldPlan& folds, const PearlConfig& config,
                 const SeedStream& seed, const Surrogate& phi = {})
{
    FoldFit out;
    out.fold = k;
    out.rows = folds.indices(k);
    const auto train_rows = folds.complement(k);
    if (out.rows.empty() || train_rows.empty())
        throw ValidationError("fit_fold: fold " + std::to_string(k + 1) + " or its complement is empty");

    // The nuisance fits only ever see the complement of fold k.
    const Dataset train = data.subset(train_rows);
    const SeedStream fold_seed = seed.derive("fold", static_cast<std::uint64_t>(k));
    out.propensity = std::make_shared<const PropensityModel>(
        fit_propensity(train, config.nuisance, fold_seed.derive("propensity")));
    out.outcome =
        std::make_shared<const OutcomeModel>(fit_outcome(train, config.nuisance, fold_seed.derive("outcome")));

    const Dataset held_out = data.subset(out.rows);
    out.weights = compute_weights(held_out, *out.propensity, *out.outcome);
    const auto loss = assemble_loss(held_out.x(), out.weights, phi);
    auto [beta, lambda] = fit_with_policy(loss, config.lambda, config.solver, fold_seed.derive("lambda"));
    out.beta = std::move(beta);
    out.lambda = lambda;
    return out;
}

inline Vector pool_mean(const std::vector<Vector>& parts)
{
    if (parts.empty())
        throw ValidationError("pool_mean: nothing to pool");
    Vector sum = Vector::Zero(parts.front().size());
    for (const auto& v : parts)
        sum += v;
    return sum / static_cast<double>(parts.size());
}

/// Cross-fitted estimator over a given fold plan; the pooled coefficients are
/// the mean of the per-fold solutions.
template <class Surrogate = LogisticSurrogate>
PearlFit fit_all(const Dataset& data, const FoldPlan& folds, const PearlConfig& config, const SeedStream& seed,
                 const Surrogate& phi = {})
{
    PearlFit fit;
    fit.folds = folds;
    std::vector<Vector> betas;
    for (int k = 0; k < folds.folds(); ++k) {
        try {
            fit.fold_fits.push_back(fit_fold(k, data, folds, config, seed, phi));
        } catch (const Error& e) {
            throw Error(e.kind(), "fold " + std::to_string(k + 1) + ": " + e.what());
        }
        betas.push_back(fit.fold_fits.back().beta);
    }
    fit.pooled = pool_mean(betas);
    return fit;
}

template <class Surrogate = LogisticSurrogate>
PearlFit fit_all(const Dataset& data, int K, const PearlConfig& config, const SeedStream& seed,
                 const Surrogate& phi = {})
{
    return fit_all(data, make_folds(data.n(), K, seed.derive("folds")), config, seed, phi);
}

} // namespace pearl
