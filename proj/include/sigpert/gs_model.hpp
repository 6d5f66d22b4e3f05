#pragma once

#include <cstdint>
#include <vector>

#include "sigpert/tensor_sig.hpp"

namespace sigpert {

// Gibson-Schwartz scalars plus the timescale delta and contract maturities.
// Units: rates per year, vols per sqrt(year), maturities in years.
struct GSParams {
    double r = 0.05;       // interest rate
    double s = 0.0;        // storage cost rate
    double sigma = 0.2;    // spot log-price vol
    double kappa = 0.5;    // convenience-yield mean-reversion speed
    double theta = 0.05;   // convenience-yield long-run level
    double gamma = 0.1;    // convenience-yield vol
    double rho = 0.3;      // Brownian correlation
    double c = 0.15;       // initial convenience yield
    double x0 = 0.0;       // initial log spot
    double delta = 1.0;    // timescale; delta=0 accepted as the frozen-yield limit
    std::vector<double> maturities{0.5, 1.0};

    void validate() const;  // throws std::invalid_argument naming the offending field
};

// Correlated two-factor increment table on the uniform N-step grid of [0,1].
// Immutable after make(); identical seed gives bit-identical increments.
struct BrownianDriver {
    std::uint64_t seed = 0;
    int steps = 0;
    double rho = 0.0;
    std::vector<double> dw1, dw2;

    static BrownianDriver make(std::uint64_t seed, int steps, double rho);
    double dt() const { return 1.0 / steps; }
    std::vector<double> grid() const;
};

// Deterministic per-index seed stream for ensembles (splitmix64 mixing).
std::uint64_t split_seed(std::uint64_t base, std::uint64_t index);

struct GSPaths {
    MultiPath x;  // 1-dim log spot returns
    MultiPath c;  // 1-dim convenience yield
};

// Time-scaled pair (X^delta, C^delta) on the driver grid. C uses the exact
// OU convolution form with left-point sums on the shared increments; X uses
// trapezoid quadrature of the drift plus sigma*W^1.
GSPaths simulate_gs(const GSParams& params, const BrownianDriver& driver);

// Expansion coefficients C-hat^(j), X-hat^(j) for j = 0..j_max as grid
// functions on the driver grid. Odd C orders are time-kernel integrals on the
// same dW2 table; X-hat^(j) = -integral of C-hat^(j) (trapezoid) for j >= 1.
struct HatTerms {
    std::vector<double> times;
    std::vector<std::vector<double>> c_hat;  // [j][grid point]
    std::vector<std::vector<double>> x_hat;
};
HatTerms simulate_hat_terms(const GSParams& params, const BrownianDriver& driver, int j_max);

// Order-n partial sums with weights sqrt(delta)^j.
GSPaths assemble_approx(const GSParams& params, const HatTerms& hat, int n);

// d-dim futures log-return term structure F^k = X - B^delta(T_k) C.
MultiPath futures_returns(const MultiPath& x, const MultiPath& c, const GSParams& params);

// Path of int_0^t (t-s)^k dW^2_s by left-point sums (binomial split into
// running moments, exact for the discrete sum).
std::vector<double> time_kernel_integral(const BrownianDriver& driver, int k);

// Cumulative trapezoid of a grid function against dt.
std::vector<double> cum_trapezoid(const std::vector<double>& y, double dt);

// OU closed-form moments of C^delta_t.
double ou_mean(const GSParams& params, double t);
double ou_var(const GSParams& params, double t);

}  // namespace sigpert
