#pragma once

#include <pearl/dataset.hpp>
#include <pearl/error.hpp>
#include <pearl/folds.hpp>
#include <pearl/seed.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace pearl {

/// A smooth convex empirical loss (1/m) sum_i f_i(x_i' theta). Each f_i is
/// described through scalar callbacks of the linear predictor t = x_i' theta:
/// value, derivative and curvature (second derivative).
template <class L>
concept SmoothLoss = requires(const L& loss, Index i, double t, std::span<const Index> rows) {
    { loss.rows() } -> std::convertible_to<Index>;
    { loss.features() } -> std::convertible_to<const Matrix&>;
    { loss.value(i, t) } -> std::convertible_to<double>;
    { loss.derivative(i, t) } -> std::convertible_to<double>;
    { loss.curvature(i, t) } -> std::convertible_to<double>;
    { loss.subset(rows) } -> std::same_as<L>;
};

namespace detail {

inline Matrix take_rows(const Matrix& x, std::span<const Index> rows)
{
    Matrix out(static_cast<Index>(rows.size()), x.cols());
    for (Index r = 0; r < out.rows(); ++r)
        out.row(r) = x.row(rows[static_cast<std::size_t>(r)]);
    return out;
}

inline Vector take(const Vector& v, std::span<const Index> rows)
{
    Vector out(static_cast<Index>(rows.size()));
    for (Index r = 0; r < out.size(); ++r)
        out(r) = v(rows[static_cast<std::size_t>(r)]);
    return out;
}

} // namespace detail

/// Losses whose curvature does not depend on the predictor expose the
/// curvature-weighted Gram matrix X' diag(f'') X / m, which lets the solver
/// run covariance updates instead of residual updates.
template <class L>
concept HasGram = SmoothLoss<L> && requires(const L& loss) {
    { loss.gram() } -> std::convertible_to<const Matrix&>;
};

/// Weighted least squares: f_i(t) = h_i (y_i - t)^2.
class WeightedSquaredLoss {
public:
    WeightedSquaredLoss(Matrix x, Vector target, Vector weights)
        : x_(std::move(x)), target_(std::move(target)), weights_(std::move(weights)),
          gram_(std::make_shared<GramCache>())
    {
        if (target_.size() != x_.rows() || weights_.size() != x_.rows())
            throw ValidationError("weighted least squares: size mismatch");
        if ((weights_.array() < 0.0).any())
            throw ValidationError("weighted least squares: negative observation weight");
    }

    WeightedSquaredLoss(Matrix x, Vector target)
        : WeightedSquaredLoss(std::move(x), target, Vector::Ones(target.size()))
    {
    }

    Index rows() const noexcept { return x_.rows(); }
    const Matrix& features() const noexcept { return x_; }
    const Vector& target() const noexcept { return target_; }
    const Vector& weights() const noexcept { return weights_; }

    double value(Index i, double t) const
    {
        const double r = target_(i) - t;
        return weights_(i) * r * r;
    }
    double derivative(Index i, double t) const { return -2.0 * weights_(i) * (target_(i) - t); }
    double curvature(Index i, double) const { return 2.0 * weights_(i); }

    WeightedSquaredLoss subset(std::span<const Index> rows) const
    {
        return {detail::take_rows(x_, rows), detail::take(target_, rows), detail::take(weights_, rows)};
    }

    /// X' diag(2h) X / m, computed on first use.
    const Matrix& gram() const
    {
        std::call_once(gram_->once, [this] {
            const Matrix weighted = x_.array().colwise() * (2.0 * weights_).array();
            gram_->value.noalias() = x_.transpose() * weighted / static_cast<double>(x_.rows());
        });
        return gram_->value;
    }

private:
    struct GramCache {
        std::once_flag once;
        Matrix value;
    };

    Matrix x_;
    Vector target_;
    Vector weights_;
    std::shared_ptr<GramCache> gram_;
};

/// A loss given entirely by user callbacks f(i, t), f'(i, t), f''(i, t)
/// where i indexes into the row map of the original data.
class CallbackLoss {
public:
    using Scalar = std::function<double(Index, double)>;

    CallbackLoss(Matrix x, Scalar value, Scalar derivative, Scalar curvature)
        : x_(std::move(x)), value_(std::move(value)), derivative_(std::move(derivative)),
          curvature_(std::move(curvature))
    {
        row_map_.resize(static_cast<std::size_t>(x_.rows()));
        for (Index i = 0; i < x_.rows(); ++i)
            row_map_[static_cast<std::size_t>(i)] = i;
    }

    Index rows() const noexcept { return x_.rows(); }
    const Matrix& features() const noexcept { return x_; }
    double value(Index i, double t) const { return value_(original(i), t); }
    double derivative(Index i, double t) const { return derivative_(original(i), t); }
    double curvature(Index i, double t) const { return curvature_(original(i), t); }

    CallbackLoss subset(std::span<const Index> rows) const
    {
        CallbackLoss out = *this;
        out.x_ = detail::take_rows(x_, rows);
        out.row_map_.clear();
        for (Index r : rows)
            out.row_map_.push_back(original(r));
        return out;
    }

private:
    Index original(Index i) const { return row_map_[static_cast<std::size_t>(i)]; }

    Matrix x_;
    Scalar value_, derivative_, curvature_;
    std::vector<Index> row_map_;
};

struct SolverOptions {
    double tolerance = 1e-7;      ///< KKT residual and coefficient-change threshold
    int max_iterations = 10000;   ///< cap on coordinate-descent passes
    Vector penalty_factors;       ///< per-coordinate multipliers of lambda; empty means all ones
    std::optional<Vector> warm_start;
    bool record_trace = false;
    /// Looser threshold for the fold fits inside cross-validation and for the
    /// intermediate warm starts of the refit path. Held-out losses only need a
    /// few digits; the returned fit always uses `tolerance`.
    double cv_tolerance = 1e-4;
};

struct L1Solution {
    Vector coef;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int passes = 0;
    std::vector<double> objective_trace;
};

/// Thrown when the pass budget runs out; carries the last iterate.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, Vector last_iterate, double kkt_residual)
        : NumericalError(what), last_iterate_(std::move(last_iterate)), kkt_residual_(kkt_residual)
    {
    }
    const Vector& last_iterate() const noexcept { return last_iterate_; }
    double kkt_residual() const noexcept { return kkt_residual_; }

private:
    Vector last_iterate_;
    double kkt_residual_;
};

namespace detail {

inline Vector resolve_penalty(const SolverOptions& opts, Index p)
{
    if (opts.penalty_factors.size() == 0)
        return Vector::Ones(p);
    if (opts.penalty_factors.size() != p)
        throw ValidationError("penalty_factors length does not match coefficient dimension");
    if ((opts.penalty_factors.array() < 0.0).any())
        throw ValidationError("penalty factors must be nonnegative");
    return opts.penalty_factors;
}

inline double soft_threshold(double z, double gamma)
{
    if (z > gamma)
        return z - gamma;
    if (z < -gamma)
        return z + gamma;
    return 0.0;
}

template <SmoothLoss L>
double smooth_value(const L& loss, const Vector& eta)
{
    double sum = 0.0;
    for (Index i = 0; i < loss.rows(); ++i)
        sum += loss.value(i, eta(i));
    return sum / static_cast<double>(loss.rows());
}

template <SmoothLoss L>
Vector smooth_gradient(const L& loss, const Vector& eta)
{
    Vector g(loss.rows());
    for (Index i = 0; i < loss.rows(); ++i)
        g(i) = loss.derivative(i, eta(i));
    return loss.features().transpose() * g / static_cast<double>(loss.rows());
}

inline double penalty_value(const Vector& theta, double lambda, const Vector& pf)
{
    double s = 0.0;
    for (Index j = 0; j < theta.size(); ++j)
        if (pf(j) > 0.0 && theta(j) != 0.0)
            s += lambda * pf(j) * std::abs(theta(j));
    return s;
}

/// Exact minimizer of the quadratic model c'theta + theta'G theta/2 + lambda
/// sum pf_j |theta_j| assuming the support and signs of `trial` are right.
/// Replaces `trial` and returns true only when the candidate satisfies the
/// model's optimality conditions on every coordinate.
inline bool solve_on_support(const Matrix& G, const Vector& c, double lambda, const Vector& pf, Vector& trial)
{
    std::vector<Index> support;
    for (Index j = 0; j < trial.size(); ++j)
        if (trial(j) != 0.0)
            support.push_back(j);
    const auto k = static_cast<Index>(support.size());
    if (k == 0)
        return false;
    Matrix gaa(k, k);
    Vector rhs(k);
    for (Index a = 0; a < k; ++a) {
        const Index ja = support[static_cast<std::size_t>(a)];
        const double sign = trial(ja) > 0.0 ? 1.0 : -1.0;
        rhs(a) = -(c(ja) + lambda * pf(ja) * sign);
        for (Index b = 0; b < k; ++b)
            gaa(a, b) = G(ja, support[static_cast<std::size_t>(b)]);
    }
    const Eigen::LDLT<Matrix> ldlt(gaa);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        return false;
    const Vector sol = ldlt.solve(rhs);
    if (!sol.allFinite() || (gaa * sol - rhs).norm() > 1e-10 * (1.0 + rhs.norm()))
        return false;
    Vector candidate = Vector::Zero(trial.size());
    for (Index a = 0; a < k; ++a) {
        const Index ja = support[static_cast<std::size_t>(a)];
        if (pf(ja) > 0.0 && (sol(a) > 0.0) != (trial(ja) > 0.0))
            return false;
        candidate(ja) = sol(a);
    }
    const Vector model_grad = c + G * candidate;
    for (Index j = 0; j < trial.size(); ++j)
        if (candidate(j) == 0.0 && std::abs(model_grad(j)) > lambda * pf(j) * (1.0 + 1e-12) + 1e-13)
            return false;
    trial = candidate;
    return true;
}

} // namespace detail

/// max_j of the subgradient optimality violation of
/// (1/m) sum f_i(x_i' theta) + lambda sum_j pf_j |theta_j|.
template <SmoothLoss L>
double kkt_residual(const L& loss, const Vector& theta, double lambda, const Vector& penalty_factors = {})
{
    const Vector pf = penalty_factors.size() ? penalty_factors : Vector::Ones(theta.size());
    const Vector eta = loss.features() * theta;
    const Vector grad = detail::smooth_gradient(loss, eta);
    double worst = 0.0;
    for (Index j = 0; j < theta.size(); ++j) {
        const double bound = lambda * pf(j);
        double r;
        if (theta(j) == 0.0)
            r = std::max(0.0, std::abs(grad(j)) - bound);
        else
            r = std::abs(grad(j) + bound * (theta(j) > 0.0 ? 1.0 : -1.0));
        worst = std::max(worst, r);
    }
    return worst;
}

template <SmoothLoss L>
double penalized_objective(const L& loss, const Vector& theta, double lambda, const Vector& penalty_factors = {})
{
    const Vector pf = penalty_factors.size() ? penalty_factors : Vector::Ones(theta.size());
    return detail::smooth_value(loss, loss.features() * theta) + detail::penalty_value(theta, lambda, pf);
}

/// Minimize (1/m) sum_i f_i(x_i' theta) + lambda * sum_j pf_j |theta_j|.
///
/// Each outer iteration builds the local quadratic model of the smooth part
/// (exact curvature at the current predictor), minimizes model + penalty by
/// cyclic coordinate descent with active-set sweeps, and then backtracks along
/// the resulting direction until the true objective does not increase. When
/// backtracking fails the iteration falls back to a proximal-gradient step.
/// Returns once the KKT residual is at most opts.tolerance.
template <SmoothLoss L>
L1Solution solve_l1(const L& loss, double lambda, const SolverOptions& opts = {})
{
    const Matrix& x = loss.features();
    const Index m = loss.rows();
    const Index p = x.cols();
    if (m < 1)
        throw ValidationError("solve_l1: no observations");
    if (!(lambda >= 0.0))
        throw ValidationError("solve_l1: lambda must be nonnegative");
    if (!(opts.tolerance > 0.0) || opts.max_iterations < 1)
        throw ValidationError("solve_l1: tolerance must be positive and max_iterations >= 1");
    const Vector pf = detail::resolve_penalty(opts, p);
    const double inv_m = 1.0 / static_cast<double>(m);

    Vector theta = Vector::Zero(p);
    if (opts.warm_start) {
        if (opts.warm_start->size() != p)
            throw ValidationError("solve_l1: warm start has wrong dimension");
        theta = *opts.warm_start;
    }
    // Coordinates that can never leave zero are pinned there.
    for (Index j = 0; j < p; ++j)
        if (!std::isfinite(lambda * pf(j)))
            theta(j) = 0.0;

    Vector eta = x * theta;
    double objective = detail::smooth_value(loss, eta) + detail::penalty_value(theta, lambda, pf);
    if (!std::isfinite(objective))
        throw NumericalError("solve_l1: non-finite objective at the starting point");

    L1Solution sol;
    if (opts.record_trace)
        sol.objective_trace.push_back(objective);

    Vector g(m), h(m), r(m), curv(p), grad(p), model_grad(p);
    std::vector<char> active(static_cast<std::size_t>(p), 0);
    int passes = 0;

    auto compute_kkt = [&](const Vector& gradient) {
        double worst = 0.0;
        for (Index j = 0; j < p; ++j) {
            const double bound = lambda * pf(j);
            double v;
            if (theta(j) == 0.0)
                v = std::isfinite(bound) ? std::max(0.0, std::abs(gradient(j)) - bound) : 0.0;
            else
                v = std::abs(gradient(j) + bound * (theta(j) > 0.0 ? 1.0 : -1.0));
            worst = std::max(worst, v);
        }
        return worst;
    };

    while (true) {
        for (Index i = 0; i < m; ++i) {
            g(i) = loss.derivative(i, eta(i));
            h(i) = loss.curvature(i, eta(i));
        }
        grad.noalias() = x.transpose() * g * inv_m;
        const double kkt = compute_kkt(grad);
        if (!std::isfinite(kkt))
            throw NumericalError("solve_l1: non-finite gradient");
        if (kkt <= opts.tolerance) {
            sol.kkt_residual = kkt;
            break;
        }
        if (passes >= opts.max_iterations)
            throw ConvergenceError("solve_l1: no convergence within " + std::to_string(opts.max_iterations) +
                                       " passes (KKT residual " + std::to_string(kkt) + ")",
                                   theta, kkt);

        if constexpr (HasGram<L>)
            curv = loss.gram().diagonal();
        else
            for (Index j = 0; j < p; ++j)
                curv(j) = x.col(j).cwiseAbs2().dot(h) * inv_m;

        // Coordinate descent on the quadratic model. Residual form keeps the
        // model gradient scalar r per row; covariance form keeps the model
        // gradient per coordinate.
        Vector trial = theta;
        if constexpr (HasGram<L>)
            model_grad = grad;
        else
            r = g;
        const double inner_tol = 0.1 * opts.tolerance;
        auto sweep = [&](bool full) {
            double max_change = 0.0;
            for (Index j = 0; j < p; ++j) {
                if (!full && !active[static_cast<std::size_t>(j)])
                    continue;
                const double bound = lambda * pf(j);
                if (!std::isfinite(bound) || curv(j) <= 1e-300)
                    continue;
                double gj;
                if constexpr (HasGram<L>)
                    gj = model_grad(j);
                else
                    gj = x.col(j).dot(r) * inv_m;
                const double updated = detail::soft_threshold(curv(j) * trial(j) - gj, bound) / curv(j);
                const double delta = updated - trial(j);
                if (delta != 0.0) {
                    if constexpr (HasGram<L>)
                        model_grad.noalias() += delta * loss.gram().col(j);
                    else
                        r.array() += delta * h.array() * x.col(j).array();
                    trial(j) = updated;
                    max_change = std::max(max_change, std::abs(delta) * std::sqrt(curv(j)));
                }
                active[static_cast<std::size_t>(j)] = trial(j) != 0.0;
            }
            return max_change;
        };
        int inner_passes = 0;
        while (passes < opts.max_iterations) {
            ++passes;
            ++inner_passes;
            if (sweep(true) < inner_tol)
                break;
            while (passes < opts.max_iterations) {
                ++passes;
                ++inner_passes;
                if (sweep(false) < inner_tol)
                    break;
            }
            if constexpr (HasGram<L>) {
                if (inner_passes >= 8 && detail::solve_on_support(loss.gram(), grad - loss.gram() * theta, lambda,
                                                                  pf, trial))
                    break;
            }
        }

        const Vector direction = trial - theta;
        const Vector eta_dir = x * direction;
        double step = 1.0;
        bool accepted = false;
        Vector next_eta;
        double next_objective = objective;
        for (int halving = 0; halving < 40; ++halving) {
            next_eta = eta + step * eta_dir;
            const Vector candidate = theta + step * direction;
            next_objective = detail::smooth_value(loss, next_eta) + detail::penalty_value(candidate, lambda, pf);
            if (std::isfinite(next_objective) && next_objective <= objective + 1e-14 * std::abs(objective)) {
                accepted = true;
                theta = candidate;
                break;
            }
            step *= 0.5;
        }

        if (!accepted) {
            // Proximal-gradient fallback with backtracking on the Lipschitz estimate.
            double lipschitz = std::max(curv.maxCoeff(), 1e-12);
            for (int tries = 0; tries < 60 && !accepted; ++tries, lipschitz *= 2.0) {
                Vector candidate(p);
                for (Index j = 0; j < p; ++j) {
                    const double bound = lambda * pf(j);
                    candidate(j) = std::isfinite(bound)
                                       ? detail::soft_threshold(theta(j) - grad(j) / lipschitz, bound / lipschitz)
                                       : 0.0;
                }
                next_eta = x * candidate;
                next_objective =
                    detail::smooth_value(loss, next_eta) + detail::penalty_value(candidate, lambda, pf);
                if (std::isfinite(next_objective) && next_objective <= objective) {
                    accepted = true;
                    theta = candidate;
                }
            }
            ++passes;
            if (!accepted) {
                // No descent is possible in floating point; accept the current point.
                sol.kkt_residual = kkt;
                if (kkt <= 100.0 * opts.tolerance)
                    break;
                throw ConvergenceError("solve_l1: line search failed (KKT residual " + std::to_string(kkt) + ")",
                                       theta, kkt);
            }
        }
        eta = next_eta;
        objective = next_objective;
        if (opts.record_trace)
            sol.objective_trace.push_back(objective);
    }

    sol.coef = std::move(theta);
    sol.objective = objective;
    sol.passes = passes;
    return sol;
}

/// Smallest lambda whose solution has every penalized coordinate at zero.
/// Unpenalized coordinates are first fitted with the penalized ones pinned.
template <SmoothLoss L>
double lambda_max(const L& loss, const SolverOptions& opts = {})
{
    const Index p = loss.features().cols();
    const Vector pf = detail::resolve_penalty(opts, p);
    Vector theta = Vector::Zero(p);
    if ((pf.array() == 0.0).any()) {
        SolverOptions pinned = opts;
        pinned.warm_start.reset();
        pinned.penalty_factors = pf;
        for (Index j = 0; j < p; ++j)
            if (pf(j) > 0.0)
                pinned.penalty_factors(j) = std::numeric_limits<double>::infinity();
        theta = solve_l1(loss, 1.0, pinned).coef;
    }
    const Vector grad = detail::smooth_gradient(loss, loss.features() * theta);
    double lmax = 0.0;
    for (Index j = 0; j < p; ++j)
        if (pf(j) > 0.0)
            lmax = std::max(lmax, std::abs(grad(j)) / pf(j));
    return lmax;
}

/// Descending, strictly positive lambda grid plus the number of CV folds.
struct LambdaPath {
    std::vector<double> lambdas;
    int cv_folds = 5;

    void validate() const
    {
        if (lambdas.empty())
            throw ValidationError("lambda path is empty");
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            if (!(lambdas[i] > 0.0))
                throw ValidationError("lambda path must be strictly positive");
            if (i > 0 && !(lambdas[i] < lambdas[i - 1]))
                throw ValidationError("lambda path must be strictly descending");
        }
        if (cv_folds < 2)
            throw ValidationError("cross-validation needs at least 2 folds");
    }
};

/// `count` log-spaced values from lambda_max down to ratio * lambda_max.
template <SmoothLoss L>
LambdaPath make_lambda_path(const L& loss, const SolverOptions& opts = {}, int count = 50, double ratio = 0.01,
                            int cv_folds = 5)
{
    double top = lambda_max(loss, opts);
    if (!(top > 0.0))
        top = 1e-8; // gradient vanishes at the null model; any grid works
    LambdaPath path;
    path.cv_folds = cv_folds;
    for (int k = 0; k < count; ++k) {
        const double frac = count == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(count - 1);
        path.lambdas.push_back(top * std::pow(ratio, frac));
    }
    return path;
}

struct CvResult {
    double lambda = 0.0;
    std::size_t index = 0;
    std::vector<double> curve; ///< mean out-of-fold loss per grid value (inf when unusable)
};

/// Pick lambda by K-fold cross-validation of the mean out-of-fold smooth loss.
/// Ties go to the larger lambda.
template <SmoothLoss L>
CvResult cv_lambda(const L& loss, const LambdaPath& path, const FoldPlan& folds, const SolverOptions& opts = {})
{
    path.validate();
    if (folds.n() != loss.rows())
        throw ValidationError("cv_lambda: fold plan does not match the number of observations");
    const std::size_t grid = path.lambdas.size();
    std::vector<double> total(grid, 0.0);
    std::vector<char> usable(grid, 1);

    for (int f = 0; f < folds.folds(); ++f) {
        const auto train_rows = folds.indices(f);
        if (train_rows.empty() || static_cast<Index>(train_rows.size()) == loss.rows())
            throw ValidationError("cv_lambda: empty training or validation fold");
        const L train = loss.subset(folds.complement(f));
        const L test = loss.subset(train_rows);
        SolverOptions local = opts;
        local.warm_start.reset();
        local.tolerance = std::max(opts.tolerance, opts.cv_tolerance);
        for (std::size_t l = 0; l < grid; ++l) {
            if (!usable[l])
                continue;
            try {
                const auto sol = solve_l1(train, path.lambdas[l], local);
                local.warm_start = sol.coef;
                const double v = detail::smooth_value(test, test.features() * sol.coef);
                if (!std::isfinite(v))
                    usable[l] = 0;
                else
                    total[l] += v;
            } catch (const NumericalError&) {
                usable[l] = 0;
            }
        }
    }

    CvResult out;
    out.curve.resize(grid);
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t l = 0; l < grid; ++l) {
        out.curve[l] = usable[l] ? total[l] / folds.folds() : std::numeric_limits<double>::infinity();
        if (usable[l] && out.curve[l] < best) {
            best = out.curve[l];
            out.index = l;
            found = true;
        }
    }
    if (!found)
        throw NumericalError("cv_lambda: every lambda on the grid failed to converge");
    out.lambda = path.lambdas[out.index];
    return out;
}

struct CvFit {
    L1Solution solution;
    CvResult cv;
};

/// Cross-validate lambda on a default grid, then refit on all rows by
/// following the path down to the selected value with warm starts.
template <SmoothLoss L>
CvFit fit_cv(const L& loss, const SolverOptions& opts, const SeedStream& seed, int grid_size = 50,
             double ratio = 0.01, int cv_folds = 5)
{
    const auto path = make_lambda_path(loss, opts, grid_size, ratio, cv_folds);
    const int k = std::min<int>(cv_folds, static_cast<int>(loss.rows()));
    const auto folds = make_folds(loss.rows(), k, seed.derive("cv-folds"));
    CvFit out;
    out.cv = cv_lambda(loss, path, folds, opts);
    SolverOptions local = opts;
    local.warm_start.reset();
    local.tolerance = std::max(opts.tolerance, opts.cv_tolerance);
    for (std::size_t l = 0; l < out.cv.index; ++l)
        local.warm_start = solve_l1(loss, path.lambdas[l], local).coef;
    local.tolerance = opts.tolerance;
    out.solution = solve_l1(loss, path.lambdas[out.cv.index], local);
    return out;
}

/// Lasso least squares with nonnegative observation weights:
/// minimize (1/m) sum_i h_i (target_i - features_i' w)^2 + lambda ||w||_1.
inline L1Solution weighted_lasso_ls(const Matrix& features, const Vector& target, const Vector& obs_weights,
                                    double lambda, const SolverOptions& opts = {})
{
    if (obs_weights.size() != features.rows() || target.size() != features.rows())
        throw ValidationError("weighted_lasso_ls: size mismatch");
    if ((obs_weights.array() < 0.0).any())
        throw ValidationError("weighted_lasso_ls: weights must be nonnegative");
    if (!(obs_weights.array() > 0.0).any())
        throw ValidationError("weighted_lasso_ls: all weights are zero");
    return solve_l1(WeightedSquaredLoss(features, target, obs_weights), lambda, opts);
}

} // namespace pearl
