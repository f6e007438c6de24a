#pragma once

#include <pearl/dataset.hpp>
#include <pearl/error.hpp>
#include <pearl/kernel.hpp>
#include <pearl/l1_solver.hpp>
#include <pearl/seed.hpp>
#include <pearl/surrogate.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pearl {

/// Weighted logistic regression loss for labels in {-1,+1}:
/// f_i(t) = w_i log(1 + exp(-y_i t)).
class LogisticLoss {
public:
    LogisticLoss(Matrix x, Vector labels, Vector weights)
        : x_(std::move(x)), labels_(std::move(labels)), weights_(std::move(weights))
    {
        if (labels_.size() != x_.rows() || weights_.size() != x_.rows())
            throw ValidationError("logistic loss: size mismatch");
    }
    LogisticLoss(Matrix x, Vector labels) : LogisticLoss(std::move(x), labels, Vector::Ones(labels.size())) {}

    Index rows() const noexcept { return x_.rows(); }
    const Matrix& features() const noexcept { return x_; }
    double value(Index i, double t) const { return weights_(i) * softplus(-labels_(i) * t); }
    double derivative(Index i, double t) const { return -weights_(i) * labels_(i) * expit(-labels_(i) * t); }
    double curvature(Index i, double t) const { return weights_(i) * expit(t) * expit(-t); }

    LogisticLoss subset(std::span<const Index> rows) const
    {
        return {detail::take_rows(x_, rows), detail::take(labels_, rows), detail::take(weights_, rows)};
    }

private:
    Matrix x_;
    Vector labels_;
    Vector weights_;
};

enum class PropensityBackend { l1_logistic, screen_kernel, known };
enum class OutcomeBackend { l1_linear, screen_kernel, zero, known };

inline std::string_view to_string(PropensityBackend b)
{
    switch (b) {
    case PropensityBackend::l1_logistic: return "l1-logistic";
    case PropensityBackend::screen_kernel: return "screen-kernel";
    case PropensityBackend::known: return "known";
    }
    return "?";
}

inline std::string_view to_string(OutcomeBackend b)
{
    switch (b) {
    case OutcomeBackend::l1_linear: return "l1-linear";
    case OutcomeBackend::screen_kernel: return "screen-kernel";
    case OutcomeBackend::zero: return "zero";
    case OutcomeBackend::known: return "known";
    }
    return "?";
}

inline PropensityBackend parse_propensity_backend(std::string_view s)
{
    if (s == "l1-logistic")
        return PropensityBackend::l1_logistic;
    if (s == "screen-kernel")
        return PropensityBackend::screen_kernel;
    if (s == "known")
        return PropensityBackend::known;
    throw ValidationError("unknown propensity backend '" + std::string(s) + "'");
}

inline OutcomeBackend parse_outcome_backend(std::string_view s)
{
    if (s == "l1-linear")
        return OutcomeBackend::l1_linear;
    if (s == "screen-kernel")
        return OutcomeBackend::screen_kernel;
    if (s == "zero")
        return OutcomeBackend::zero;
    if (s == "known")
        return OutcomeBackend::known;
    throw ValidationError("unknown outcome backend '" + std::string(s) + "'");
}

/// Kernel bandwidths: Silverman's rule, Silverman times a common LOO-CV factor,
/// or per-dimension LOO-CV factors.
enum class BandwidthMode { silverman, cv_scale, cv_per_dimension };

inline std::string_view to_string(BandwidthMode b)
{
    switch (b) {
    case BandwidthMode::silverman: return "silverman";
    case BandwidthMode::cv_scale: return "cv-scale";
    case BandwidthMode::cv_per_dimension: return "cv-per-dimension";
    }
    return "?";
}

inline BandwidthMode parse_bandwidth_mode(std::string_view s)
{
    if (s == "silverman")
        return BandwidthMode::silverman;
    if (s == "cv-scale")
        return BandwidthMode::cv_scale;
    if (s == "cv-per-dimension")
        return BandwidthMode::cv_per_dimension;
    throw ValidationError("unknown bandwidth mode '" + std::string(s) + "'");
}

using CovariateFunction = std::function<double(const Eigen::Ref<const Vector>&)>;
using ArmFunction = std::function<double(int, const Eigen::Ref<const Vector>&)>;

struct KernelOptions {
    Index max_screened = 20;      ///< cap on floor(m / log m)
    Index min_arm_size = 20;      ///< smallest training subsample accepted
    BandwidthMode bandwidth = BandwidthMode::silverman;
    std::vector<double> bandwidth_scales{0.5, 0.75, 1.0, 1.5, 2.0};
    /// Per-dimension grid (multiples of the Silverman bandwidth; inf drops the dimension).
    std::vector<double> dimension_factors{0.5, 1.0, 2.0, 4.0, std::numeric_limits<double>::infinity()};
    int dimension_sweeps = 2;
};

struct NuisanceConfig {
    PropensityBackend propensity = PropensityBackend::screen_kernel;
    OutcomeBackend outcome = OutcomeBackend::screen_kernel;
    double trim_lo = 0.1;
    double trim_hi = 0.9;
    CovariateFunction known_propensity; ///< pr(A = 1 | x) for the "known" backend
    ArmFunction known_outcome;          ///< Q(a; x) for the "known" backend
    KernelOptions kernel;
    SolverOptions solver;
    int lambda_grid = 50;
};

namespace detail {

inline Matrix with_intercept(const Matrix& x)
{
    Matrix z(x.rows(), x.cols() + 1);
    z.col(0).setOnes();
    z.rightCols(x.cols()) = x;
    return z;
}

inline Vector intercept_free_penalty(Index p)
{
    Vector pf = Vector::Ones(p + 1);
    pf(0) = 0.0;
    return pf;
}

inline Matrix select_columns(const Matrix& x, const IndexList& cols)
{
    Matrix out(x.rows(), static_cast<Index>(cols.size()));
    for (Index c = 0; c < out.cols(); ++c)
        out.col(c) = x.col(cols[static_cast<std::size_t>(c)]);
    return out;
}

inline Vector select_entries(const Eigen::Ref<const Vector>& v, const IndexList& cols)
{
    Vector out(static_cast<Index>(cols.size()));
    for (Index c = 0; c < out.size(); ++c)
        out(c) = v(cols[static_cast<std::size_t>(c)]);
    return out;
}

/// Screen, then fit a kernel regression on the kept columns.
inline CovariateFunction fit_screened_kernel(const Matrix& x, const Vector& target, const KernelOptions& opts,
                                             IndexList* kept_out)
{
    const Index d = default_screen_count(x.rows(), x.cols(), opts.max_screened);
    const auto screening = screen_variables(x, target, d);
    auto kept = screening.selected();
    Matrix xs = select_columns(x, kept);
    auto model = std::make_shared<const KernelRegression>(
        opts.bandwidth == BandwidthMode::cv_scale ? KernelRegression::fit_cv(std::move(xs), target, opts.bandwidth_scales)
        : opts.bandwidth == BandwidthMode::cv_per_dimension
            ? KernelRegression::fit_cv_per_dimension(std::move(xs), target, opts.bandwidth_scales,
                                                     opts.dimension_factors, opts.dimension_sweeps)
            : KernelRegression(std::move(xs), target));
    if (kept_out)
        *kept_out = kept;
    return [model, kept](const Eigen::Ref<const Vector>& q) { return model->predict(select_entries(q, kept)); };
}

} // namespace detail

/// Fitted pr(A = a | x), clamped into [trim_lo, trim_hi].
class PropensityModel {
public:
    PropensityModel(PropensityBackend backend, CovariateFunction raw, Index p, double lo, double hi)
        : backend_(backend), raw_(std::move(raw)), p_(p), lo_(lo), hi_(hi)
    {
        if (!(lo > 0.0 && lo <= hi && hi < 1.0))
            throw ValidationError("propensity trim bounds must satisfy 0 < lo <= hi < 1");
    }

    PropensityBackend backend() const noexcept { return backend_; }
    double trim_lo() const noexcept { return lo_; }
    double trim_hi() const noexcept { return hi_; }
    Index dimension() const noexcept { return p_; }

    /// Untrimmed backend output for pr(A = 1 | x).
    double raw(const Eigen::Ref<const Vector>& x) const
    {
        check(x);
        return raw_(x);
    }

    double predict(int a, const Eigen::Ref<const Vector>& x) const
    {
        const double p1 = std::clamp(raw(x), lo_, hi_);
        return a == 1 ? p1 : 1.0 - p1;
    }

    /// Provenance: columns kept by screening (kernel backend) or the lambda used (l1 backend).
    IndexList selected;
    double lambda = 0.0;
    Index training_size = 0;

private:
    void check(const Eigen::Ref<const Vector>& x) const
    {
        if (x.size() != p_)
            throw ValidationError("propensity prediction: expected dimension " + std::to_string(p_) + ", got " +
                                  std::to_string(x.size()));
    }

    PropensityBackend backend_;
    CovariateFunction raw_;
    Index p_;
    double lo_, hi_;
};

/// Fitted E(Y | X = x, A = a), one predictor per arm.
class OutcomeModel {
public:
    OutcomeModel(OutcomeBackend backend, CovariateFunction treated, CovariateFunction control, Index p)
        : backend_(backend), treated_(std::move(treated)), control_(std::move(control)), p_(p)
    {
    }

    OutcomeBackend backend() const noexcept { return backend_; }
    Index dimension() const noexcept { return p_; }

    double predict(int a, const Eigen::Ref<const Vector>& x) const
    {
        if (x.size() != p_)
            throw ValidationError("outcome prediction: expected dimension " + std::to_string(p_) + ", got " +
                                  std::to_string(x.size()));
        return a == 1 ? treated_(x) : control_(x);
    }

    IndexList selected_treated, selected_control;
    Index training_size = 0;

private:
    OutcomeBackend backend_;
    CovariateFunction treated_, control_;
    Index p_;
};

inline double predict_propensity(const PropensityModel& model, int a, const Eigen::Ref<const Vector>& x)
{
    return model.predict(a, x);
}

inline double predict_outcome(const OutcomeModel& model, int a, const Eigen::Ref<const Vector>& x)
{
    return model.predict(a, x);
}

inline PropensityModel fit_propensity(const Dataset& data, const NuisanceConfig& config, const SeedStream& seed)
{
    if (!data.has_both_arms())
        throw ValidationError("fit_propensity: both treatment arms must be present");
    const Index p = data.p();
    const Vector treated = (data.a().array() == 1).cast<double>();
    switch (config.propensity) {
    case PropensityBackend::known: {
        if (!config.known_propensity)
            throw ValidationError("fit_propensity: 'known' backend needs a propensity function");
        PropensityModel model(PropensityBackend::known, config.known_propensity, p, config.trim_lo, config.trim_hi);
        model.training_size = data.n();
        return model;
    }
    case PropensityBackend::l1_logistic: {
        SolverOptions opts = config.solver;
        opts.penalty_factors = detail::intercept_free_penalty(p);
        const LogisticLoss loss(detail::with_intercept(data.x()), data.a().cast<double>());
        const auto fit = fit_cv(loss, opts, seed.derive("propensity-cv"), config.lambda_grid);
        const Vector coef = fit.solution.coef;
        PropensityModel model(
            PropensityBackend::l1_logistic,
            [coef](const Eigen::Ref<const Vector>& x) { return expit(coef(0) + coef.tail(x.size()).dot(x)); }, p,
            config.trim_lo, config.trim_hi);
        model.lambda = fit.cv.lambda;
        for (Index j = 0; j < p; ++j)
            if (coef(j + 1) != 0.0)
                model.selected.push_back(j);
        model.training_size = data.n();
        return model;
    }
    case PropensityBackend::screen_kernel: {
        if (data.n() < config.kernel.min_arm_size)
            throw ValidationError("fit_propensity: too few observations for the kernel backend");
        IndexList kept;
        auto raw = detail::fit_screened_kernel(data.x(), treated, config.kernel, &kept);
        PropensityModel model(PropensityBackend::screen_kernel, std::move(raw), p, config.trim_lo, config.trim_hi);
        model.selected = std::move(kept);
        model.training_size = data.n();
        return model;
    }
    }
    throw ValidationError("fit_propensity: unsupported backend");
}

inline OutcomeModel fit_outcome(const Dataset& data, const NuisanceConfig& config, const SeedStream& seed)
{
    if (!data.has_both_arms())
        throw ValidationError("fit_outcome: both treatment arms must be present");
    const Index p = data.p();
    switch (config.outcome) {
    case OutcomeBackend::zero: {
        auto zero = [](const Eigen::Ref<const Vector>&) { return 0.0; };
        OutcomeModel model(OutcomeBackend::zero, zero, zero, p);
        model.training_size = data.n();
        return model;
    }
    case OutcomeBackend::known: {
        if (!config.known_outcome)
            throw ValidationError("fit_outcome: 'known' backend needs an outcome function");
        auto q = config.known_outcome;
        OutcomeModel model(
            OutcomeBackend::known, [q](const Eigen::Ref<const Vector>& x) { return q(1, x); },
            [q](const Eigen::Ref<const Vector>& x) { return q(-1, x); }, p);
        model.training_size = data.n();
        return model;
    }
    case OutcomeBackend::l1_linear:
    case OutcomeBackend::screen_kernel: break;
    }

    CovariateFunction arm_fit[2];
    IndexList kept[2];
    for (int arm = 0; arm < 2; ++arm) {
        const int a = arm == 0 ? 1 : -1;
        IndexList rows;
        for (Index i = 0; i < data.n(); ++i)
            if (data.a()(i) == a)
                rows.push_back(i);
        const Matrix xa = detail::take_rows(data.x(), rows);
        const Vector ya = detail::select_entries(data.y(), rows);
        if (config.outcome == OutcomeBackend::screen_kernel) {
            if (static_cast<Index>(rows.size()) < config.kernel.min_arm_size)
                throw ValidationError("fit_outcome: arm " + std::to_string(a) + " has only " +
                                      std::to_string(rows.size()) + " observations (minimum " +
                                      std::to_string(config.kernel.min_arm_size) + ")");
            arm_fit[arm] = detail::fit_screened_kernel(xa, ya, config.kernel, &kept[arm]);
        } else {
            if (rows.size() < 2)
                throw ValidationError("fit_outcome: arm " + std::to_string(a) + " has fewer than 2 observations");
            SolverOptions opts = config.solver;
            opts.penalty_factors = detail::intercept_free_penalty(p);
            const WeightedSquaredLoss loss(detail::with_intercept(xa), ya);
            const int cv_folds = std::min<int>(5, static_cast<int>(rows.size()));
            const auto fit =
                fit_cv(loss, opts, seed.derive(a == 1 ? "outcome-cv:treated" : "outcome-cv:control"),
                       config.lambda_grid, 0.01, cv_folds);
            const Vector coef = fit.solution.coef;
            for (Index j = 0; j < p; ++j)
                if (coef(j + 1) != 0.0)
                    kept[arm].push_back(j);
            arm_fit[arm] = [coef](const Eigen::Ref<const Vector>& x) { return coef(0) + coef.tail(x.size()).dot(x); };
        }
    }
    OutcomeModel model(config.outcome, std::move(arm_fit[0]), std::move(arm_fit[1]), p);
    model.selected_treated = std::move(kept[0]);
    model.selected_control = std::move(kept[1]);
    model.training_size = data.n();
    return model;
}

} // namespace pearl
