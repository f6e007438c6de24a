#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>

namespace pearl {

/// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// 1 / (1 + e^-z) without overflow.
inline double expit(double z)
{
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Logistic surrogate phi(t) = log(1 + e^-t): convex, phi'(0) = -1/2 < 0, phi'' > 0.
struct LogisticSurrogate {
    static constexpr const char* tag = "logistic";
    double value(double t) const { return softplus(-t); }
    double derivative(double t) const { return -expit(-t); }
    double curvature(double t) const { return expit(t) * expit(-t); }
};

/// Any surrogate supplied as callbacks. The caller is responsible for
/// convexity and phi'(0) < 0.
struct CallbackSurrogate {
    std::string tag = "custom";
    std::function<double(double)> phi, dphi, d2phi;

    double value(double t) const { return phi(t); }
    double derivative(double t) const { return dphi(t); }
    double curvature(double t) const { return d2phi(t); }
};

} // namespace pearl
