#include "sigpert/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sigpert/perturb.hpp"
#include "sigpert/util.hpp"

namespace sigpert {

namespace {

double raw_weight(int m) { return std::pow(2.0, 0.5 * m * (1.0 - m)) / kWeightNormalizer; }

double simpson(const std::vector<double>& f, double h) {
    // f on 2k+1 points
    double acc = f.front() + f.back();
    for (std::size_t i = 1; i + 1 < f.size(); ++i) acc += f[i] * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

}  // namespace

WeightSpec WeightSpec::standard(int m_max) {
    WeightSpec ws;
    ws.w.resize(m_max);
    for (int m = 1; m <= m_max; ++m) ws.w[m - 1] = raw_weight(m);
    return ws;
}

double WeightSpec::weight(int m) const {
    if (m < 1 || static_cast<std::size_t>(m) > w.size())
        throw std::invalid_argument("WeightSpec: level out of range");
    return w[m - 1];
}

double WeightSpec::tail_weight(int depth) const {
    double acc = 0.0;
    double fact = 1.0;
    for (int m = 1; m <= 60; ++m) {
        fact *= m;
        if (m > depth) acc += raw_weight(m) / fact;
    }
    return acc;
}

SigSequenceSample SigSequenceSample::from_signatures(std::span<const TruncatedSignature> sigs) {
    if (sigs.empty()) throw std::invalid_argument("SigSequenceSample: empty ensemble");
    SigSequenceSample out;
    out.dim = sigs.front().dim;
    out.depth = sigs.front().depth;
    out.paths = sigs.size();
    std::size_t words = total_size(out.dim, out.depth);
    out.samples.assign(words, std::vector<double>(out.paths));
    for (std::size_t r = 0; r < out.paths; ++r) {
        const TruncatedSignature& s = sigs[r];
        if (s.dim != out.dim || s.depth != out.depth)
            throw std::invalid_argument("SigSequenceSample: mixed dim/depth in ensemble");
        std::size_t off = 0;
        for (int level = 0; level <= out.depth; ++level)
            for (double v : s.levels[level]) out.samples[off++][r] = v;
    }
    return out;
}

SigSequenceSample SigSequenceSample::difference(const SigSequenceSample& a,
                                                const SigSequenceSample& b) {
    if (a.dim != b.dim || a.depth != b.depth || a.paths != b.paths)
        throw std::invalid_argument("SigSequenceSample: shape mismatch");
    SigSequenceSample out = a;
    for (std::size_t w = 0; w < out.samples.size(); ++w)
        for (std::size_t r = 0; r < out.paths; ++r) out.samples[w][r] -= b.samples[w][r];
    return out;
}

double sample_mean(std::span<const double> xs) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc / xs.size();
}

double sample_se(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    double m = sample_mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / (xs.size() - 1) / xs.size());
}

double p_moment_root(std::span<const double> xs, double p) {
    double acc = 0.0;
    for (double x : xs) acc += std::pow(std::abs(x), p);
    return std::pow(acc / xs.size(), 1.0 / p);
}

NormResult weighted_sig_norm(const SigSequenceSample& sample, double p,
                             const WeightSpec& weights) {
    if (p < 1.0) throw std::invalid_argument("weighted_sig_norm: p must be >= 1");
    if (sample.paths == 0) throw std::invalid_argument("weighted_sig_norm: empty sample");
    NormResult out;
    out.value = p_moment_root(sample.samples[0], p);  // Y_0 term
    double fact = 1.0;
    std::size_t dpow = 1;
    std::size_t off = 1;
    for (int m = 1; m <= sample.depth; ++m) {
        fact *= m;
        dpow *= static_cast<std::size_t>(sample.dim);
        double coeff = weights.weight(m) / (fact * static_cast<double>(dpow));
        for (std::size_t k = 0; k < dpow; ++k)
            out.value += coeff * p_moment_root(sample.samples[off + k], p);
        off += dpow;
    }
    out.tail_bound = weights.tail_weight(sample.depth);
    return out;
}

double hardy_norm(const HardyDecomposition& decomp, double p) {
    if (p < 1.0) throw std::invalid_argument("hardy_norm: p must be >= 1");
    double out = std::abs(decomp.y0);
    if (decomp.deterministic) {
        out += std::sqrt(decomp.qv1);
        double tv = 0.0;
        for (std::size_t i = 1; i < decomp.a_grid.size(); ++i)
            tv += std::abs(decomp.a_grid[i] - decomp.a_grid[i - 1]);
        out += tv;
    } else {
        std::vector<double> halves(decomp.qv_samples);
        for (double& q : halves) q = std::sqrt(std::max(q, 0.0));
        out += p_moment_root(halves, p);
        out += p_moment_root(decomp.tv_samples, p);
    }
    return out;
}

double exp_minus_partial(double x, int m) {
    double partial = 0.0;
    double term = 1.0;
    for (int k = 0; k <= m; ++k) {
        partial += term;
        term *= -x / (k + 1);
    }
    return std::exp(-x) - partial;
}

double cy_diff_qv1(const GSParams& params, double delta, int n, int panels) {
    // <M>_1 = delta gamma^2 int_0^1 K_n(u)^2 du with the stochastic kernel
    // K_n(u) = e^{-delta kappa u} - partial sum to floor((n+1)/2) - 1.
    int m = (n + 1) / 2 - 1;
    double dk = delta * params.kappa;
    std::vector<double> f(panels + 1);
    for (int i = 0; i <= panels; ++i) {
        double u = static_cast<double>(i) / panels;
        double k = exp_minus_partial(dk * u, m);
        f[i] = k * k;
    }
    return delta * params.gamma * params.gamma * simpson(f, 1.0 / panels);
}

double cy_diff_total_variation(const GSParams& params, double delta, int n, int panels) {
    // A_n(t) = (c - theta)(e^{-delta kappa t} - partial to floor(n/2));
    // A'_n(t) = (c - theta)(-delta kappa)(e^{-delta kappa t} - partial to floor(n/2)-1).
    int m = n / 2 - 1;
    double dk = delta * params.kappa;
    double scale = std::abs(params.c - params.theta) * dk;
    std::vector<double> f(panels + 1);
    for (int i = 0; i <= panels; ++i) {
        double t = static_cast<double>(i) / panels;
        f[i] = std::abs(exp_minus_partial(dk * t, m));
    }
    return scale * simpson(f, 1.0 / panels);
}

double cy_diff_hardy_norm(const GSParams& params, double delta, int n, int panels) {
    return std::sqrt(cy_diff_qv1(params, delta, n, panels)) +
           cy_diff_total_variation(params, delta, n, panels);
}

double x_diff_hardy_upper(const GSParams& params, double delta, int n, int panels) {
    // E[(int_0^1 |C^delta_s - C^(n)_s| ds)^2] <= int_0^1 E[(C^delta - C^(n))_s^2] ds
    // = int_0^1 [A_n(s)^2 + delta gamma^2 int_0^s K_n(v)^2 dv] ds, all deterministic.
    int ma = n / 2;
    int mk = (n + 1) / 2 - 1;
    double dk = delta * params.kappa;
    double cth = params.c - params.theta;
    int np = panels;
    double h = 1.0 / np;
    std::vector<double> k2(np + 1), g(np + 1, 0.0), f(np + 1);
    for (int i = 0; i <= np; ++i) {
        double k = exp_minus_partial(dk * i * h, mk);
        k2[i] = k * k;
    }
    for (int i = 1; i <= np; ++i) g[i] = g[i - 1] + 0.5 * h * (k2[i - 1] + k2[i]);
    for (int i = 0; i <= np; ++i) {
        double a = cth * exp_minus_partial(dk * i * h, ma);
        f[i] = a * a + delta * params.gamma * params.gamma * g[i];
    }
    return std::sqrt(simpson(f, h));
}

SlopeFit fit_loglog(const std::vector<double>& deltas, const std::vector<double>& norms) {
    if (deltas.size() != norms.size() || deltas.size() < 3)
        throw std::runtime_error("fit_loglog: degenerate fit (need >= 3 points)");
    auto ols = [](const std::vector<double>& xs, const std::vector<double>& ys) {
        SlopeFit f;
        std::size_t n = xs.size();
        double mx = sample_mean(xs), my = sample_mean(ys);
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        if (sxx == 0.0) throw std::runtime_error("fit_loglog: degenerate fit (no spread)");
        f.slope = sxy / sxx;
        f.intercept = my - f.slope * mx;
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = ys[i] - (f.intercept + f.slope * xs[i]);
            ss += r * r;
        }
        f.slope_se = n > 2 ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
        f.points = static_cast<int>(n);
        return f;
    };
    std::vector<double> xs(deltas.size()), ys(deltas.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0.0) || !(norms[i] > 0.0))
            throw std::runtime_error("fit_loglog: nonpositive point");
        xs[i] = std::log(deltas[i]);
        ys[i] = std::log(norms[i]);
    }
    SlopeFit fit = ols(xs, ys);
    // asymptotic-regime guard: drop the largest delta if it is an outlier
    std::size_t imax = static_cast<std::size_t>(
        std::max_element(deltas.begin(), deltas.end()) - deltas.begin());
    double rmse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        rmse += r * r;
    }
    rmse = std::sqrt(rmse / xs.size());
    double rmax = std::abs(ys[imax] - (fit.intercept + fit.slope * xs[imax]));
    if (xs.size() > 3 && rmax > 2.0 * rmse) {
        std::vector<double> xs2, ys2;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (i != imax) {
                xs2.push_back(xs[i]);
                ys2.push_back(ys[i]);
            }
        fit = ols(xs2, ys2);
        fit.dropped_largest = true;
    }
    return fit;
}

CyRateResult cy_hardy_rates(const GSParams& params, const std::vector<int>& n_list,
                            const std::vector<double>& deltas) {
    params.validate();
    if (deltas.size() < 5)
        throw std::invalid_argument("cy_hardy_rates: need a geometric delta grid of >= 5 points");
    CyRateResult out;
    for (int n : n_list) {
        std::vector<double> norms;
        for (double delta : deltas) {
            CyRateCell cell;
            cell.n = n;
            cell.delta = delta;
            cell.qv = cy_diff_qv1(params, delta, n);
            cell.tv = cy_diff_total_variation(params, delta, n);
            cell.norm = std::sqrt(cell.qv) + cell.tv;
            cell.x_upper = x_diff_hardy_upper(params, delta, n);
            cell.dominated = cell.x_upper <= cell.norm;
            out.cells.push_back(cell);
            norms.push_back(cell.norm);
        }
        out.fits.emplace_back(n, fit_loglog(deltas, norms));
    }
    return out;
}

namespace {

// norm + batch standard error over an ensemble difference
void norm_with_se(const SigSequenceSample& diff, double p, const WeightSpec& ws,
                  double& norm, double& se, double& tail) {
    NormResult nr = weighted_sig_norm(diff, p, ws);
    norm = nr.value;
    tail = nr.tail_bound;
    std::size_t batches = std::min<std::size_t>(20, diff.paths / 20);
    if (batches < 2) {
        se = 0.0;
        return;
    }
    std::vector<double> batch_norms;
    for (std::size_t b = 0; b < batches; ++b) {
        std::size_t lo = diff.paths * b / batches, hi = diff.paths * (b + 1) / batches;
        SigSequenceSample part;
        part.dim = diff.dim;
        part.depth = diff.depth;
        part.paths = hi - lo;
        part.samples.resize(diff.samples.size());
        for (std::size_t w = 0; w < diff.samples.size(); ++w)
            part.samples[w].assign(diff.samples[w].begin() + lo, diff.samples[w].begin() + hi);
        batch_norms.push_back(weighted_sig_norm(part, p, ws).value);
    }
    se = sample_se(batch_norms);
}

}  // namespace

SigRateResult sig_truncation_rates(const GSParams& params, const DriverSpec& spec,
                                   const std::vector<int>& n_list,
                                   const std::vector<double>& deltas, double p, int depth) {
    params.validate();
    if (spec.paths < 1000)
        throw std::invalid_argument("sig_truncation_rates: need R >= 1000 paths");
    int max_n = *std::max_element(n_list.begin(), n_list.end());
    WeightSpec ws = WeightSpec::standard(depth);
    std::size_t R = static_cast<std::size_t>(spec.paths);

    SigRateResult out;
    for (double delta : deltas) {
        GSParams pd = params;
        pd.delta = delta;
        std::vector<TruncatedSignature> full(R);
        std::vector<std::vector<TruncatedSignature>> approx(n_list.size(),
                                                            std::vector<TruncatedSignature>(R));
        parallel_for(R, [&](std::size_t r) {
            BrownianDriver drv = BrownianDriver::make(split_seed(spec.seed, r), spec.steps,
                                                      pd.rho);
            GSPaths gs = simulate_gs(pd, drv);
            full[r] = signature(futures_returns(gs.x, gs.c, pd), depth);
            HatTerms hat = simulate_hat_terms(pd, drv, max_n);
            for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
                int n = n_list[ni];
                GSPaths ap = assemble_approx(pd, hat, n);
                MultiPath pair = zip_paths({&ap.x, &ap.c});
                approx[ni][r] = lift_term_structure(signature(pair, depth), pd, n / 2);
            }
        });
        SigSequenceSample full_sample = SigSequenceSample::from_signatures(full);
        for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
            SigSequenceSample diff = SigSequenceSample::difference(
                full_sample, SigSequenceSample::from_signatures(approx[ni]));
            SigRateCell cell;
            cell.n = n_list[ni];
            cell.delta = delta;
            norm_with_se(diff, p, ws, cell.norm, cell.se, cell.tail);
            out.cells.push_back(cell);
        }
    }
    if (deltas.size() >= 3) {
        for (int n : n_list) {
            std::vector<double> ds, norms;
            for (const SigRateCell& c : out.cells)
                if (c.n == n) {
                    ds.push_back(c.delta);
                    norms.push_back(c.norm);
                }
            SlopeFit fit = fit_loglog(ds, norms);
            if (fit.slope_se > 0.1) out.underresolved = true;
            out.fits.emplace_back(n, fit);
        }
    }
    return out;
}

ExpansionRateResult expansion_residual_rates(const GSParams& params, const DriverSpec& spec,
                                             const std::vector<double>& deltas, double p,
                                             int depth) {
    params.validate();
    ExpansionRateResult out;
    if (params.gamma == 0.0 && params.c == params.theta) {
        out.degenerate = true;
        return out;
    }
    WeightSpec ws = WeightSpec::standard(depth);
    std::size_t R = static_cast<std::size_t>(spec.paths);
    int d = static_cast<int>(params.maturities.size());
    std::size_t words = total_size(d, depth);

    // the basis and its per-word order parts do not depend on delta
    std::vector<ExpansionParts> parts(R);
    parallel_for(R, [&](std::size_t r) {
        BrownianDriver drv = BrownianDriver::make(split_seed(spec.seed, r), spec.steps,
                                                  params.rho);
        parts[r] = expansion_parts(expansion_basis(params, drv, depth), params, depth);
    });

    std::vector<double> norms;
    for (double delta : deltas) {
        GSParams pd = params;
        pd.delta = delta;
        double sd = std::sqrt(delta);
        std::vector<TruncatedSignature> full(R);
        parallel_for(R, [&](std::size_t r) {
            BrownianDriver drv = BrownianDriver::make(split_seed(spec.seed, r), spec.steps,
                                                      pd.rho);
            GSPaths gs = simulate_gs(pd, drv);
            full[r] = signature(futures_returns(gs.x, gs.c, pd), depth);
        });
        SigSequenceSample diff = SigSequenceSample::from_signatures(full);
        for (std::size_t w = 0; w < words; ++w)
            for (std::size_t r = 0; r < R; ++r) {
                double acc = 0.0, sdp = 1.0;
                for (int q = 0; q <= kMaxHalfOrder; ++q) {
                    acc += sdp * parts[r].per_word[w][q];
                    sdp *= sd;
                }
                diff.samples[w][r] -= acc;
            }
        ExpansionRateCell cell;
        cell.delta = delta;
        norm_with_se(diff, p, ws, cell.norm, cell.se, cell.tail);
        out.cells.push_back(cell);
        norms.push_back(cell.norm);
    }
    if (norms.size() >= 3) out.fit = fit_loglog(deltas, norms);
    return out;
}

}  // namespace sigpert
