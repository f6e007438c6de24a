#pragma once

#include <pearl/dataset.hpp>
#include <pearl/error.hpp>
#include <pearl/seed.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

namespace pearl {

/// Uniform random permutation of 0..n-1 (Fisher-Yates, portable across
/// standard libraries since it only consumes raw engine output).
inline IndexList random_permutation(Index n, const SeedStream& seed)
{
    IndexList perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    auto engine = seed.engine();
    for (Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Index>(engine() % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

/// Partition of 0..n-1 into K folds whose sizes differ by at most one.
/// Fold labels are 0-based in code; reports print them 1-based.
class FoldPlan {
public:
    FoldPlan() = default;
    FoldPlan(std::vector<int> assignments, int folds) : assignments_(std::move(assignments)), folds_(folds)
    {
        if (folds_ < 2)
            throw ValidationError("fold plan needs K >= 2");
        for (int f : assignments_)
            if (f < 0 || f >= folds_)
                throw ValidationError("fold assignment out of range");
    }

    int folds() const noexcept { return folds_; }
    Index n() const noexcept { return static_cast<Index>(assignments_.size()); }
    const std::vector<int>& assignments() const noexcept { return assignments_; }

    /// Rows in fold k, ascending.
    IndexList indices(int k) const
    {
        IndexList out;
        for (std::size_t i = 0; i < assignments_.size(); ++i)
            if (assignments_[i] == k)
                out.push_back(static_cast<Index>(i));
        return out;
    }

    /// Rows outside fold k, ascending.
    IndexList complement(int k) const
    {
        IndexList out;
        for (std::size_t i = 0; i < assignments_.size(); ++i)
            if (assignments_[i] != k)
                out.push_back(static_cast<Index>(i));
        return out;
    }

    std::vector<Index> sizes() const
    {
        std::vector<Index> s(static_cast<std::size_t>(folds_), 0);
        for (int f : assignments_)
            ++s[static_cast<std::size_t>(f)];
        return s;
    }

private:
    std::vector<int> assignments_;
    int folds_ = 0;
};

/// Random K-fold partition with floor(n/K) <= |fold| <= floor(n/K)+1.
inline FoldPlan make_folds(Index n, int K, const SeedStream& seed)
{
    if (K < 2 || K > n)
        throw ValidationError("make_folds requires 2 <= K <= n (K=" + std::to_string(K) +
                              ", n=" + std::to_string(n) + ")");
    const auto perm = random_permutation(n, seed);
    std::vector<int> assignment(static_cast<std::size_t>(n));
    const Index base = n / K;
    const Index extra = n % K;
    Index pos = 0;
    for (int k = 0; k < K; ++k) {
        const Index size = base + (k < extra ? 1 : 0);
        for (Index r = 0; r < size; ++r, ++pos)
            assignment[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos)])] = k;
    }
    return FoldPlan(std::move(assignment), K);
}

struct SplitHalves {
    IndexList first;
    IndexList second;
};

/// Random two-way split with |first| = round(fraction * n); both halves sorted.
inline SplitHalves split_half(Index n, double fraction, const SeedStream& seed)
{
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ValidationError("split fraction must lie in (0, 1)");
    const auto n1 = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
    if (n1 < 1 || n1 >= n)
        throw ValidationError("degenerate split: one side would be empty");
    auto perm = random_permutation(n, seed);
    SplitHalves halves;
    halves.first.assign(perm.begin(), perm.begin() + n1);
    halves.second.assign(perm.begin() + n1, perm.end());
    std::sort(halves.first.begin(), halves.first.end());
    std::sort(halves.second.begin(), halves.second.end());
    return halves;
}

} // namespace pearl
