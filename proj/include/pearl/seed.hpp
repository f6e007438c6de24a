#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pearl {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace detail

/// A root seed plus a path of labels. Every consumer derives its own labeled
/// child stream, so the draws a component sees never depend on how many draws
/// some other component made or in which order parallel work was scheduled.
class SeedStream {
public:
    explicit SeedStream(std::uint64_t root_seed = 0) : root_(root_seed) {}

    SeedStream derive(std::string_view label) const
    {
        SeedStream child = *this;
        child.path_.emplace_back(label);
        return child;
    }

    SeedStream derive(std::string_view label, std::uint64_t index) const
    {
        return derive(std::string(label) + ":" + std::to_string(index));
    }

    std::uint64_t root_seed() const noexcept { return root_; }
    const std::vector<std::string>& path() const noexcept { return path_; }

    /// 64-bit key identifying (root_seed, path).
    std::uint64_t key() const
    {
        std::uint64_t h = detail::splitmix64(root_);
        for (const auto& label : path_)
            h = detail::splitmix64(h ^ detail::fnv1a(label));
        return h;
    }

    std::mt19937_64 engine() const
    {
        const std::uint64_t k = key();
        std::seed_seq seq{static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                          static_cast<std::uint32_t>(root_), static_cast<std::uint32_t>(root_ >> 32)};
        return std::mt19937_64(seq);
    }

private:
    std::uint64_t root_;
    std::vector<std::string> path_;
};

} // namespace pearl
