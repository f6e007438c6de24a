#pragma once

#include <pearl/dataset.hpp>
#include <pearl/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace pearl {

/// Empirical distance correlation between two samples, via the
/// double-centered pairwise-distance matrices. Returns 0 when either sample
/// is constant (the statistic is undefined there).
///
/// Only the target's distance matrix is centered explicitly: since its rows
/// and columns sum to zero, sum_ij A_ij B_ij equals sum_ij |x_i - x_j| B_ij.
class DistanceCorrelation {
public:
    explicit DistanceCorrelation(const Vector& target) : m_(target.size()), centered_(m_, m_)
    {
        if (m_ < 2)
            throw ValidationError("distance correlation needs at least two observations");
        target_dvar_ = centered_distance(target, centered_);
    }

    double operator()(const Vector& x) const
    {
        if (x.size() != m_)
            throw ValidationError("distance correlation: sample length mismatch");
        if (!(target_dvar_ > 0.0))
            return 0.0;
        double cross = 0.0, sq = 0.0;
        Vector row_mean = Vector::Zero(m_);
        for (Index j = 0; j < m_; ++j)
            for (Index i = j + 1; i < m_; ++i) {
                const double d = std::abs(x(i) - x(j));
                cross += 2.0 * d * centered_(i, j);
                sq += 2.0 * d * d;
                row_mean(i) += d;
                row_mean(j) += d;
            }
        const double mm = static_cast<double>(m_);
        row_mean /= mm;
        const double grand = row_mean.mean();
        const double x_dvar = sq - 2.0 * mm * row_mean.squaredNorm() + mm * mm * grand * grand;
        if (!(x_dvar > 1e-14 * sq) || !(sq > 0.0))
            return 0.0;
        const double r2 = cross / std::sqrt(x_dvar * target_dvar_);
        return std::sqrt(std::clamp(r2, 0.0, 1.0));
    }

private:
    /// Fills `out` with the double-centered distance matrix and returns sum of its squares.
    static double centered_distance(const Vector& v, Matrix& out)
    {
        const Index m = v.size();
        for (Index j = 0; j < m; ++j)
            for (Index i = 0; i < m; ++i)
                out(i, j) = std::abs(v(i) - v(j));
        const Vector row = out.rowwise().mean();
        const double grand = row.mean();
        for (Index j = 0; j < m; ++j)
            for (Index i = 0; i < m; ++i)
                out(i, j) += grand - row(i) - row(j);
        return out.squaredNorm();
    }

    Index m_;
    Matrix centered_;
    double target_dvar_ = 0.0;
};

inline double distance_correlation(const Vector& x, const Vector& y) { return DistanceCorrelation(y)(x); }

struct ScreeningResult {
    IndexList ranking;          ///< all columns, best first
    std::vector<double> scores; ///< matching distance correlations, non-increasing
    Index kept = 0;

    IndexList selected() const { return {ranking.begin(), ranking.begin() + kept}; }
};

/// Rank covariate columns by distance correlation with the target and keep
/// the top d. Ties keep the lower column index first.
inline ScreeningResult screen_variables(const Matrix& x, const Vector& target, Index d)
{
    if (target.size() != x.rows())
        throw ValidationError("screen_variables: target and covariate rows differ");
    if (d < 0 || d > x.cols())
        throw ValidationError("screen_variables: keep count must lie in [0, p]");
    const DistanceCorrelation dcor(target);
    std::vector<double> score(static_cast<std::size_t>(x.cols()));
    for (Index j = 0; j < x.cols(); ++j)
        score[static_cast<std::size_t>(j)] = dcor(x.col(j));
    ScreeningResult out;
    out.ranking.resize(score.size());
    std::iota(out.ranking.begin(), out.ranking.end(), Index{0});
    std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](Index a, Index b) {
        return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
    });
    for (Index j : out.ranking)
        out.scores.push_back(score[static_cast<std::size_t>(j)]);
    out.kept = d;
    return out;
}

/// Default keep count floor(m / log m), capped.
inline Index default_screen_count(Index m, Index p, Index cap = 20)
{
    const auto by_size = static_cast<Index>(std::floor(static_cast<double>(m) / std::log(static_cast<double>(m))));
    return std::clamp<Index>(std::min(by_size, cap), 1, p);
}

/// Nadaraya-Watson regression with a Gaussian product kernel. Predictions are
/// convex combinations of the training responses.
class KernelRegression {
public:
    KernelRegression() = default;

    /// Per-dimension Silverman bandwidths 1.06 * sd * m^(-1/5), multiplied by `scale`.
    KernelRegression(Matrix x, Vector y, double scale = 1.0) : x_(std::move(x)), y_(std::move(y))
    {
        if (x_.rows() != y_.size() || x_.rows() < 1)
            throw ValidationError("kernel regression: bad training data");
        bandwidth_ = silverman_bandwidths(x_) * scale;
    }

    KernelRegression(Matrix x, Vector y, Vector bandwidth)
        : x_(std::move(x)), y_(std::move(y)), bandwidth_(std::move(bandwidth))
    {
        if (x_.rows() != y_.size() || bandwidth_.size() != x_.cols())
            throw ValidationError("kernel regression: bad training data");
    }

    static Vector silverman_bandwidths(const Matrix& x)
    {
        const double m = static_cast<double>(x.rows());
        Vector h(x.cols());
        for (Index k = 0; k < x.cols(); ++k) {
            const double mean = x.col(k).mean();
            const double var = m > 1 ? (x.col(k).array() - mean).square().sum() / (m - 1.0) : 0.0;
            h(k) = 1.06 * std::sqrt(var) * std::pow(m, -0.2);
        }
        return h;
    }

    const Vector& bandwidth() const noexcept { return bandwidth_; }
    Index dimension() const noexcept { return x_.cols(); }

    double predict(const Eigen::Ref<const Vector>& q) const { return predict_excluding(q, -1); }

    /// Leave-one-out prediction at training row `skip` (or a plain prediction when skip < 0).
    double predict_excluding(const Eigen::Ref<const Vector>& q, Index skip) const
    {
        if (q.size() != x_.cols())
            throw ValidationError("kernel regression: query dimension mismatch");
        const Index m = x_.rows();
        thread_local std::vector<double> expo;
        expo.assign(static_cast<std::size_t>(m), 0.0);
        double top = -std::numeric_limits<double>::infinity();
        for (Index i = 0; i < m; ++i) {
            if (i == skip)
                continue;
            double e = 0.0;
            for (Index k = 0; k < x_.cols(); ++k) {
                if (!(bandwidth_(k) > 0.0) || !std::isfinite(bandwidth_(k)))
                    continue;
                const double u = (q(k) - x_(i, k)) / bandwidth_(k);
                e -= 0.5 * u * u;
            }
            expo[static_cast<std::size_t>(i)] = e;
            top = std::max(top, e);
        }
        double num = 0.0, den = 0.0;
        for (Index i = 0; i < m; ++i) {
            if (i == skip)
                continue;
            const double w = std::exp(expo[static_cast<std::size_t>(i)] - top);
            num += w * y_(i);
            den += w;
        }
        return den > 0.0 ? num / den : y_.mean();
    }

    /// Leave-one-out mean squared error, the criterion for bandwidth refinement.
    double loo_error() const
    {
        double sse = 0.0;
        for (Index i = 0; i < x_.rows(); ++i) {
            const double r = y_(i) - predict_excluding(x_.row(i).transpose(), i);
            sse += r * r;
        }
        return sse / static_cast<double>(x_.rows());
    }

    /// Refit with the Silverman bandwidths scaled by the grid factor that
    /// minimizes leave-one-out error (ties keep the earlier factor).
    static KernelRegression fit_cv(Matrix x, Vector y, std::span<const double> scales)
    {
        KernelRegression best(x, y, 1.0);
        double best_err = std::numeric_limits<double>::infinity();
        for (double s : scales) {
            KernelRegression candidate(x, y, s);
            const double err = candidate.loo_error();
            if (err < best_err) {
                best_err = err;
                best = std::move(candidate);
            }
        }
        return best;
    }

    /// Per-dimension refinement: starting from the best common scale, cycle
    /// through the dimensions and give each the grid factor (times its Silverman
    /// bandwidth) with the smallest leave-one-out error. An infinite factor
    /// removes the dimension. Accepts a change only on strict improvement.
    static KernelRegression fit_cv_per_dimension(Matrix x, Vector y, std::span<const double> scales,
                                                 std::span<const double> factors, int sweeps = 2)
    {
        KernelRegression start = fit_cv(x, y, scales);
        const Index m = x.rows(), d = x.cols();
        if (m < 3 || d == 0)
            return start;
        const Vector base = silverman_bandwidths(x);
        Vector h = start.bandwidth();
        auto inv_sq = [](double b) { return b > 0.0 && std::isfinite(b) ? 1.0 / (b * b) : 0.0; };

        // expo(i, j) = -1/2 sum_k (x_ik - x_jk)^2 / h_k^2 over usable dimensions.
        Matrix expo = Matrix::Zero(m, m);
        for (Index k = 0; k < d; ++k) {
            const double c = -0.5 * inv_sq(h(k));
            if (c == 0.0)
                continue;
            for (Index j = 0; j < m; ++j)
                for (Index i = 0; i < m; ++i) {
                    const double u = x(i, k) - x(j, k);
                    expo(i, j) += c * u * u;
                }
        }
        // Leave-one-out error when dimension k's coefficient changes by `shift`.
        auto loo = [&](Index k, double shift) {
            double sse = 0.0;
            for (Index j = 0; j < m; ++j) {
                double top = -std::numeric_limits<double>::infinity();
                for (Index i = 0; i < m; ++i) {
                    if (i == j)
                        continue;
                    const double u = x(i, k) - x(j, k);
                    top = std::max(top, expo(i, j) + shift * u * u);
                }
                double num = 0.0, den = 0.0;
                for (Index i = 0; i < m; ++i) {
                    if (i == j)
                        continue;
                    const double u = x(i, k) - x(j, k);
                    const double w = std::exp(expo(i, j) + shift * u * u - top);
                    num += w * y(i);
                    den += w;
                }
                const double r = y(j) - num / den;
                sse += r * r;
            }
            return sse / static_cast<double>(m);
        };

        double best_err = loo(0, 0.0);
        for (int sweep = 0; sweep < sweeps; ++sweep) {
            bool changed = false;
            for (Index k = 0; k < d; ++k) {
                if (!(base(k) > 0.0))
                    continue;
                const double current = inv_sq(h(k));
                double pick = h(k);
                for (double f : factors) {
                    const double cand = std::isfinite(f) ? f * base(k) : std::numeric_limits<double>::infinity();
                    if (cand == h(k))
                        continue;
                    const double err = loo(k, -0.5 * (inv_sq(cand) - current));
                    if (err < best_err) {
                        best_err = err;
                        pick = cand;
                    }
                }
                if (pick != h(k)) {
                    const double shift = -0.5 * (inv_sq(pick) - current);
                    for (Index j = 0; j < m; ++j)
                        for (Index i = 0; i < m; ++i) {
                            const double u = x(i, k) - x(j, k);
                            expo(i, j) += shift * u * u;
                        }
                    h(k) = pick;
                    changed = true;
                }
            }
            if (!changed)
                break;
        }
        return KernelRegression(std::move(x), std::move(y), std::move(h));
    }

private:
    Matrix x_;
    Vector y_;
    Vector bandwidth_;
};

} // namespace pearl
