#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sigpert/gs_model.hpp"
#include "sigpert/tensor_sig.hpp"

namespace sigpert {

// Vasicek maturity factor of the time-scaled model, (1 - e^{-delta kappa T}) /
// (delta kappa); delta = 0 returns the series limit T.
double b_delta(double kappa, double delta, double T);

// Order-n partial sum T * sum_{j<=n} (-kappa T)^j delta^j / (j+1)!.
double b_trunc(double kappa, double delta, double T, int n);

// Vasicek bond-price A factor of the unscaled yield model; signature-invariant
// constant, exposed for pricing display and cross-checks.
double vasicek_a(double kappa, double theta, double gamma, double T);

// Map the 2-dim (X,C) signature to the d-dim term-structure signature via the
// rows (1, -B(T_k)). With trunc_order set, B is the order-trunc_order partial
// sum; otherwise the closed form at params.delta.
TruncatedSignature lift_term_structure(const TruncatedSignature& sig_xc,
                                       const GSParams& params,
                                       std::optional<int> trunc_order = {});

// Signature of the order-n futures approximant: assemble the order-n pair,
// take its signature, lift with the order-floor(n/2) maturity factors.
TruncatedSignature signature_approx(const GSParams& params, const BrownianDriver& driver,
                                    int n, int depth);

// ----- delta-expansion of the term-structure signature ---------------------
//
// The order-n approximant pair is a linear combination of unit coefficient
// paths whose weights are monomials in (gamma, kappa, theta - c) times powers
// of sqrt(delta). Signature coordinates are multilinear in the per-slot
// integrators, so every term-structure coordinate expands exactly over
// signature coordinates of the 7-letter basis path
//
//   [1] spot base   x0 - (c - r + sigma^2/2) t + sigma W^1
//   [2] unit x-hat1 = -int W^2 ds      [3] unit x-hat2 = -t^2/2
//   [4] unit x-hat3 = +int U1 ds       [5] unit c-hat1 = W^2
//   [6] unit c-hat2 = t                [7] unit c-hat3 = -U1,
//
// with U1_t = int_0^t (t-s) dW^2. The basis depends only on the driver and on
// (c, r, sigma, x0) -- never on gamma, kappa, theta.

inline constexpr int kBasisDim = 7;
inline constexpr int kMaxHalfOrder = 3;  // expansion assembled through sqrt(delta)^3

struct ExpansionBasis {
    int depth = 0;
    TruncatedSignature sig;  // 7-letter basis signature for one driver
};
ExpansionBasis expansion_basis(const GSParams& params, const BrownianDriver& driver,
                               int depth);

// gamma^a kappa^b (theta-c)^e
struct Monomial {
    int pow_gamma = 0, pow_kappa = 0, pow_thc = 0;

    double eval(const GSParams& p) const;
    std::string str() const;
    auto operator<=>(const Monomial&) const = default;
};

// One addend of a term-structure word coordinate: sqrt(delta)^half_order *
// monomial * structure * basis coordinate. `structure` collects maturity
// factors only.
struct ExpansionAddend {
    int half_order = 0;
    Monomial monomial;
    double structure = 1.0;
    Word basis_word;
};

// All addends of the given term-structure word through order
// sqrt(delta)^max_half_order.
std::vector<ExpansionAddend> expansion_addends(const Word& term_word, const GSParams& params,
                                               int max_half_order = kMaxHalfOrder);

// Per-word contributions split by half order, delta powers not applied:
// parts[flat word offset][q] for q = 0..kMaxHalfOrder.
struct ExpansionParts {
    int dim = 0;
    int depth = 0;
    std::vector<std::array<double, kMaxHalfOrder + 1>> per_word;
};
ExpansionParts expansion_parts(const ExpansionBasis& basis, const GSParams& params, int depth);

// Partial sum through order sqrt(delta)^3 as a d-dim truncated signature.
TruncatedSignature expansion_eval(const ExpansionBasis& basis, const GSParams& params,
                                  double delta, int depth);

// Monte Carlo ensemble of one expansion term: the parameter-free basis
// combination per word, grouped by (half order, coefficient monomial).
struct ExpansionTerm {
    int half_order = 0;
    Monomial monomial;
    // samples[flat word offset][driver index]
    std::vector<std::vector<double>> samples;
};
std::vector<ExpansionTerm> collect_expansion_terms(std::span<const ExpansionBasis> bases,
                                                   const GSParams& params, int depth);

}  // namespace sigpert
