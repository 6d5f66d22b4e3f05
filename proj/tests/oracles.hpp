#pragma once

// Test-only oracles, independent of the signature engine: nested quadrature
// for iterated integrals, brute-force word enumeration, OU closed forms.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "sigpert/tensor_sig.hpp"

namespace oracles {

// Kahan-compensated accumulator for the long quadrature sums.
struct Kahan {
    double sum = 0.0, comp = 0.0;

    void add(double x) {
        double y = x - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

// Nested iterated integral of the sampled path for one word by repeated
// quadrature: I_l(t) = int_0^t I_{l-1}(s) dF^{i_l}(s), trapezoid in the
// integrand (exact rule would need the polynomial structure; the error is
// O(h^2) against the piecewise-linear signature).
inline double iterated_integral_trapezoid(const sigpert::MultiPath& path,
                                          const sigpert::Word& word) {
    std::size_t n = path.points();
    std::vector<double> prev(n, 1.0), cur(n, 0.0);
    for (int letter : word.letters) {
        Kahan acc;
        cur[0] = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double df = path.value(i + 1, letter - 1) - path.value(i, letter - 1);
            acc.add(0.5 * (prev[i] + prev[i + 1]) * df);
            cur[i + 1] = acc.sum;
        }
        prev = cur;
    }
    return prev[n - 1];
}

// Left-point variant (order-h accuracy), used for the coarse-tolerance checks.
inline double iterated_integral_leftpoint(const sigpert::MultiPath& path,
                                          const sigpert::Word& word) {
    std::size_t n = path.points();
    std::vector<double> prev(n, 1.0), cur(n, 0.0);
    for (int letter : word.letters) {
        Kahan acc;
        cur[0] = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double df = path.value(i + 1, letter - 1) - path.value(i, letter - 1);
            acc.add(prev[i] * df);
            cur[i + 1] = acc.sum;
        }
        prev = cur;
    }
    return prev[n - 1];
}

// Sampled polynomial path with coefficients drawn from the given engine.
inline sigpert::MultiPath random_polynomial_path(std::mt19937_64& gen, int dim, int degree,
                                                 std::size_t points) {
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    std::vector<std::vector<double>> coeffs(dim, std::vector<double>(degree + 1));
    for (auto& cs : coeffs)
        for (double& c : cs) c = coeff(gen);
    sigpert::MultiPath p;
    p.dim = dim;
    p.times.resize(points);
    p.values.resize(points * static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < points; ++i) {
        double t = static_cast<double>(i) / (points - 1);
        p.times[i] = t;
        for (int k = 0; k < dim; ++k) {
            double v = 0.0, tp = 1.0;
            for (double c : coeffs[k]) {
                v += c * tp;
                tp *= t;
            }
            p.value(i, k) = v;
        }
    }
    return p;
}

// Gaussian random-walk path (piecewise linear between samples).
inline sigpert::MultiPath random_walk_path(std::mt19937_64& gen, int dim, std::size_t steps) {
    std::normal_distribution<double> normal(0.0, 1.0);
    sigpert::MultiPath p;
    p.dim = dim;
    p.times.resize(steps + 1);
    p.values.assign((steps + 1) * static_cast<std::size_t>(dim), 0.0);
    double sdt = std::sqrt(1.0 / steps);
    for (std::size_t i = 0; i < steps; ++i) {
        p.times[i] = static_cast<double>(i) / steps;
        for (int k = 0; k < dim; ++k)
            p.value(i + 1, k) = p.value(i, k) + sdt * normal(gen);
    }
    p.times[steps] = 1.0;
    return p;
}

}  // namespace oracles
