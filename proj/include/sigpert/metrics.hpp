#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sigpert/gs_model.hpp"
#include "sigpert/tensor_sig.hpp"

namespace sigpert {

// Normalizer of the default level weights, sum_{m>=1} sqrt(2)^{m(1-m)},
// precomputed to full double precision.
inline constexpr double kWeightNormalizer = 1.6416325606551539;

// Level weights w_m for the weighted signature L^p norm. The default is
// w_m = sqrt(2)^{m(1-m)} / kWeightNormalizer, so sum_m w_m = 1 up to the
// truncation tail.
struct WeightSpec {
    std::vector<double> w;  // w[m-1] for m = 1..m_max

    static WeightSpec standard(int m_max);
    double weight(int m) const;
    // Weight mass of the levels beyond `depth`, sum_{m>depth} w_m/m!,
    // extended analytically past m_max.
    double tail_weight(int depth) const;
};

// Monte Carlo ensemble of signature coordinates: samples[flat word offset][r]
// over R drivers, contiguous row-major word enumeration per level.
struct SigSequenceSample {
    int dim = 0;
    int depth = 0;
    std::size_t paths = 0;
    std::vector<std::vector<double>> samples;

    static SigSequenceSample from_signatures(std::span<const TruncatedSignature> sigs);
    static SigSequenceSample difference(const SigSequenceSample& a,
                                        const SigSequenceSample& b);
};

struct NormResult {
    double value = 0.0;
    double tail_bound = 0.0;  // reported, not included in value
};

// ||Y_0||_p + sum_m sum_words (w_m / (m! d^m)) ||Y_word||_p with empirical
// p-th moment roots.
NormResult weighted_sig_norm(const SigSequenceSample& sample, double p,
                             const WeightSpec& weights);

// Semimartingale decomposition Y = Y_0 + M + A. Deterministic flavor: the
// finite-variation part on a uniform grid plus a closed-form <M>_1;
// empirical flavor: per-path <M>_1 and total-variation samples.
struct HardyDecomposition {
    double y0 = 0.0;
    bool deterministic = true;
    std::vector<double> a_grid;  // A on a uniform grid, A_0 = 0
    double qv1 = 0.0;
    std::vector<double> qv_samples, tv_samples;
};
double hardy_norm(const HardyDecomposition& decomp, double p);

// Deterministic kernels of C^delta - C^(n): e^{-x} minus its partial sums.
// Simpson quadrature; `panels` exposed so tests can halve the step.
inline constexpr int kQuadPanels = 1 << 13;
double exp_minus_partial(double x, int m);  // e^{-x} - sum_{k<=m} (-x)^k/k!
double cy_diff_qv1(const GSParams& params, double delta, int n, int panels = kQuadPanels);
double cy_diff_total_variation(const GSParams& params, double delta, int n,
                               int panels = kQuadPanels);
double cy_diff_hardy_norm(const GSParams& params, double delta, int n,
                          int panels = kQuadPanels);
// Deterministic mean-square evaluation bounding the Hardy norm of
// X^delta - X^(n) = -int (C^delta - C^(n)) ds from above; always below the
// C-side norm.
double x_diff_hardy_upper(const GSParams& params, double delta, int n,
                          int panels = kQuadPanels);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    int points = 0;
    bool dropped_largest = false;
};
// OLS on (log delta, log norm); drops the largest delta when its residual
// exceeds twice the fit RMSE.
SlopeFit fit_loglog(const std::vector<double>& deltas, const std::vector<double>& norms);

struct DriverSpec {
    std::uint64_t seed = 42;
    int steps = 4096;
    int paths = 2000;
};

// --- convenience-yield Hardy-norm rates (deterministic, no MC noise) -------
struct CyRateCell {
    int n = 0;
    double delta = 0.0;
    double norm = 0.0, tv = 0.0, qv = 0.0;
    double x_upper = 0.0;
    bool dominated = false;  // x_upper <= norm
};
struct CyRateResult {
    std::vector<CyRateCell> cells;
    std::vector<std::pair<int, SlopeFit>> fits;
};
CyRateResult cy_hardy_rates(const GSParams& params, const std::vector<int>& n_list,
                            const std::vector<double>& deltas);

// --- signature truncation rates (Monte Carlo, shared drivers) --------------
struct SigRateCell {
    int n = 0;
    double delta = 0.0;
    double norm = 0.0, se = 0.0, tail = 0.0;
};
struct SigRateResult {
    std::vector<SigRateCell> cells;
    std::vector<std::pair<int, SlopeFit>> fits;
    bool underresolved = false;  // any slope se above the diagnostic threshold
};
SigRateResult sig_truncation_rates(const GSParams& params, const DriverSpec& spec,
                                   const std::vector<int>& n_list,
                                   const std::vector<double>& deltas, double p, int depth);

// --- expansion residual rate ------------------------------------------------
struct ExpansionRateCell {
    double delta = 0.0;
    double norm = 0.0, se = 0.0, tail = 0.0;
};
struct ExpansionRateResult {
    std::vector<ExpansionRateCell> cells;
    SlopeFit fit;
    bool degenerate = false;  // gamma = 0 and c = theta: no expansion content
};
ExpansionRateResult expansion_residual_rates(const GSParams& params, const DriverSpec& spec,
                                             const std::vector<double>& deltas, double p,
                                             int depth);

// small stats helpers
double sample_mean(std::span<const double> xs);
double sample_se(std::span<const double> xs);
double p_moment_root(std::span<const double> xs, double p);

}  // namespace sigpert
