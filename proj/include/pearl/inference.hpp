#pragma once

#include <pearl/dataset.hpp>
#include <pearl/error.hpp>
#include <pearl/estimator.hpp>
#include <pearl/l1_solver.hpp>
#include <pearl/seed.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace pearl {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Two-sided normal p-value 2(1 - Phi(|z|)), computed through erfc to keep
/// precision in the tail.
inline double two_sided_p_value(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

inline constexpr double kNormalQuantile975 = 1.96;

namespace detail {

/// Columns of x other than j, in their original order.
inline Matrix drop_column(const Matrix& x, Index j)
{
    Matrix out(x.rows(), x.cols() - 1);
    if (j > 0)
        out.leftCols(j) = x.leftCols(j);
    if (j < x.cols() - 1)
        out.rightCols(x.cols() - 1 - j) = x.rightCols(x.cols() - 1 - j);
    return out;
}

inline Vector drop_entry(const Vector& v, Index j)
{
    Vector out(v.size() - 1);
    if (j > 0)
        out.head(j) = v.head(j);
    if (j < v.size() - 1)
        out.tail(v.size() - 1 - j) = v.tail(v.size() - 1 - j);
    return out;
}

inline void check_coordinate(Index j, Index p)
{
    if (j < 0 || j >= p)
        throw ValidationError("coordinate " + std::to_string(j + 1) + " is outside 1.." + std::to_string(p));
}

} // namespace detail

/// Residual x_j - x_{-j}' w for each row.
inline Vector projection_residual(const Matrix& x, Index j, const Vector& w)
{
    return x.col(j) - detail::drop_column(x, j) * w;
}

struct ProjectionFit {
    Vector w;            ///< length p - 1, coefficients on the columns other than j
    double lambda = 0.0;
};

/// Curvature-weighted lasso of column j on the remaining columns, with
/// observation weights h_i = f_i''(x_i' beta).
template <SmoothLoss L>
ProjectionFit fit_w(const L& loss, const Vector& beta, Index j, const LambdaPolicy& policy,
                    const SolverOptions& opts, const SeedStream& seed, const Vector& penalty_factors = {})
{
    const Matrix& x = loss.features();
    detail::check_coordinate(j, x.cols());
    if (x.cols() < 2)
        throw ValidationError("fit_w: need at least two coefficients");
    const Vector eta = x * beta;
    Vector h(loss.rows());
    for (Index i = 0; i < loss.rows(); ++i)
        h(i) = loss.curvature(i, eta(i));
    if ((h.array() < 0.0).any())
        throw NumericalError("fit_w: negative curvature weight");
    if (!(h.array() > 0.0).any())
        throw NumericalError("fit_w: all curvature weights are zero");
    SolverOptions local = opts;
    local.warm_start.reset();
    local.penalty_factors = penalty_factors.size() ? detail::drop_entry(penalty_factors, j) : Vector{};
    const WeightedSquaredLoss projection(detail::drop_column(x, j), x.col(j), h);
    auto [w, lambda] = fit_with_policy(projection, policy, local, seed);
    return {std::move(w), lambda};
}

/// E_n[f_i'(x_i' beta) (x_ij - x_{i,-j}' w)]: the de-correlated score for
/// coordinate j evaluated at beta.
template <SmoothLoss L>
double split_score(const L& loss, const Vector& beta, const Vector& w, Index j)
{
    if (loss.rows() == 0)
        throw ValidationError("split_score: empty fold");
    const Vector eta = loss.features() * beta;
    const Vector resid = projection_residual(loss.features(), j, w);
    double sum = 0.0;
    for (Index i = 0; i < loss.rows(); ++i)
        sum += loss.derivative(i, eta(i)) * resid(i);
    return sum / static_cast<double>(loss.rows());
}

/// E_n[{f_i'(x_i' beta)}^2 (x_ij - x_{i,-j}' w)^2].
template <SmoothLoss L>
double split_variance(const L& loss, const Vector& beta, const Vector& w, Index j)
{
    if (loss.rows() == 0)
        throw ValidationError("split_variance: empty fold");
    const Vector eta = loss.features() * beta;
    const Vector resid = projection_residual(loss.features(), j, w);
    double sum = 0.0;
    for (Index i = 0; i < loss.rows(); ++i) {
        const double g = loss.derivative(i, eta(i)) * resid(i);
        sum += g * g;
    }
    return sum / static_cast<double>(loss.rows());
}

/// Partial information E_n[f_i''(x_i' beta) x_ij (x_ij - x_{i,-j}' w)].
template <SmoothLoss L>
double partial_information(const L& loss, const Vector& beta, const Vector& w, Index j)
{
    if (loss.rows() == 0)
        throw ValidationError("partial_information: empty fold");
    const Matrix& x = loss.features();
    const Vector eta = x * beta;
    const Vector resid = projection_residual(x, j, w);
    double sum = 0.0;
    for (Index i = 0; i < loss.rows(); ++i)
        sum += loss.curvature(i, eta(i)) * x(i, j) * resid(i);
    return sum / static_cast<double>(loss.rows());
}

/// Per-fold pieces of the split-and-pooled test and one-step estimator.
struct SplitScore {
    Vector w;
    Vector beta_null;          ///< fold coefficients with coordinate j set to zero
    double score = 0.0;        ///< score at beta_null (test statistic)
    double score_full = 0.0;   ///< score at the fold coefficients (one-step correction)
    double variance = 0.0;
    double information = 0.0;
    double estimate = 0.0;     ///< fold coefficient j
    double one_step = 0.0;
    double lambda_w = 0.0;
};

struct InferenceOptions {
    LambdaPolicy lambda_w;
    SolverOptions solver;
    bool variance_at_null = false;    ///< evaluate the variance at beta_null instead of the fold fit
    double min_information = 1e-8;
};

inline double one_step_estimate(double estimate, double score_full, double information)
{
    return estimate - score_full / information;
}

template <SmoothLoss L>
SplitScore split_fold(const L& loss, const Vector& beta, Index j, const InferenceOptions& opts,
                      const SeedStream& seed, const Vector& penalty_factors = {})
{
    SplitScore out;
    const auto proj = fit_w(loss, beta, j, opts.lambda_w, opts.solver, seed, penalty_factors);
    out.w = proj.w;
    out.lambda_w = proj.lambda;
    out.beta_null = beta;
    out.beta_null(j) = 0.0;
    out.score = split_score(loss, out.beta_null, out.w, j);
    out.score_full = split_score(loss, beta, out.w, j);
    out.variance = split_variance(loss, opts.variance_at_null ? out.beta_null : beta, out.w, j);
    out.information = partial_information(loss, beta, out.w, j);
    out.estimate = beta(j);
    if (!(std::abs(out.information) >= opts.min_information))
        throw NumericalError("ill-conditioned information for coordinate " + std::to_string(j + 1) + " (|I| = " +
                             std::to_string(std::abs(out.information)) + ")");
    out.one_step = one_step_estimate(out.estimate, out.score_full, out.information);
    return out;
}

struct TestReport {
    Index coordinate = 0;      ///< 1-based
    double estimate = 0.0;     ///< pooled penalized coefficient
    double one_step = 0.0;     ///< pooled one-step estimate
    double score = 0.0;        ///< pooled score S
    double sigma2 = 0.0;       ///< pooled variance
    double information = 0.0;  ///< pooled partial information
    double se = 0.0;           ///< sigma / (sqrt(n) * information)
    double z = 0.0;            ///< sqrt(n) |S| / sigma
    double z_signed = 0.0;     ///< sqrt(n) S / sigma
    double p_value = 1.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    int K = 0;
    Index n = 0;
    Index p = 0;
    bool degenerate = false;   ///< sigma was zero
};

/// Pool fold results: averages of S, sigma^2, I and the one-step estimates,
/// p-value 2(1 - Phi(sqrt(n)|S|/sigma)) and CI one_step +- 1.96 sigma / (sqrt(n) I).
inline TestReport pool_and_test(const std::vector<SplitScore>& folds, Index n, Index j, Index p)
{
    if (folds.size() < 2)
        throw ValidationError("pool_and_test: need at least two fold results");
    TestReport r;
    r.coordinate = j + 1;
    r.K = static_cast<int>(folds.size());
    r.n = n;
    r.p = p;
    const double K = static_cast<double>(folds.size());
    for (const auto& f : folds) {
        r.estimate += f.estimate;
        r.one_step += f.one_step;
        r.score += f.score;
        r.sigma2 += f.variance;
        r.information += f.information;
    }
    r.estimate /= K;
    r.one_step /= K;
    r.score /= K;
    r.sigma2 /= K;
    r.information /= K;

    const double root_n = std::sqrt(static_cast<double>(n));
    const double sigma = std::sqrt(r.sigma2);
    if (sigma > 0.0) {
        r.z_signed = root_n * r.score / sigma;
        r.z = std::abs(r.z_signed);
        r.p_value = two_sided_p_value(r.z);
    } else {
        r.degenerate = true;
        r.z = r.score == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        r.z_signed = r.score == 0.0 ? 0.0 : std::copysign(r.z, r.score);
        r.p_value = r.score == 0.0 ? 1.0 : 0.0;
    }
    r.se = sigma / (root_n * std::abs(r.information));
    r.ci_lo = r.one_step - kNormalQuantile975 * r.se;
    r.ci_hi = r.one_step + kNormalQuantile975 * r.se;
    return r;
}

/// One held-out fold of any split-and-pooled problem: the fold's loss, the
/// coefficients fitted on it, and the per-coordinate penalty factors.
template <SmoothLoss L>
struct FoldProblem {
    L loss;
    Vector beta;
    Vector penalty_factors;
};

/// Test and interval for coordinate j (0-based) from K fold problems.
template <SmoothLoss L>
TestReport test_coordinate(const std::vector<FoldProblem<L>>& folds, Index j, const InferenceOptions& opts,
                           const SeedStream& seed)
{
    if (folds.empty())
        throw ValidationError("test_coordinate: no folds");
    const Index p = folds.front().beta.size();
    detail::check_coordinate(j, p);
    std::vector<SplitScore> parts;
    Index n = 0;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        const auto& f = folds[k];
        parts.push_back(split_fold(f.loss, f.beta, j, opts,
                                   seed.derive("coordinate", static_cast<std::uint64_t>(j))
                                       .derive("fold", static_cast<std::uint64_t>(k)),
                                   f.penalty_factors));
        n += f.loss.rows();
    }
    return pool_and_test(parts, n, j, p);
}

template <class Surrogate = LogisticSurrogate>
std::vector<FoldProblem<SurrogateLoss<Surrogate>>> fold_problems(const Dataset& data, const PearlFit& fit,
                                                                   const Surrogate& phi = {})
{
    std::vector<FoldProblem<SurrogateLoss<Surrogate>>> out;
    for (const auto& f : fit.fold_fits)
        out.push_back({assemble_loss(data.subset(f.rows).x(), f.weights, phi), f.beta, {}});
    return out;
}

inline InferenceOptions inference_options(const PearlConfig& config)
{
    InferenceOptions o;
    o.lambda_w = config.lambda_w;
    o.solver = config.solver;
    return o;
}

/// Test several coordinates (0-based) of an existing cross-fitted estimate.
template <class Surrogate = LogisticSurrogate>
std::vector<TestReport> test_coordinates(const Dataset& data, const PearlFit& fit, const std::vector<Index>& coords,
                                         const InferenceOptions& opts, const SeedStream& seed,
                                         const Surrogate& phi = {})
{
    const auto problems = fold_problems(data, fit, phi);
    std::vector<TestReport> out;
    for (Index j : coords)
        out.push_back(test_coordinate(problems, j, opts, seed.derive("inference")));
    return out;
}

/// Full pipeline for one coordinate: cross-fitted estimate, then the test.
template <class Surrogate = LogisticSurrogate>
TestReport test_coordinate(const Dataset& data, Index j, int K, const PearlConfig& config, const SeedStream& seed,
                           const Surrogate& phi = {})
{
    detail::check_coordinate(j, data.p());
    const auto fit = fit_all(data, K, config, seed, phi);
    return test_coordinates(data, fit, {j}, inference_options(config), seed, phi).front();
}

} // namespace pearl
