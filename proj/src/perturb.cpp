#include "sigpert/perturb.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace sigpert {

double b_delta(double kappa, double delta, double T) {
    double x = delta * kappa;
    if (x == 0.0) return T;
    return -std::expm1(-x * T) / x;
}

double b_trunc(double kappa, double delta, double T, int n) {
    if (n < 0) throw std::invalid_argument("b_trunc: n must be >= 0");
    double term = T;  // T (-kappa T delta)^j / (j+1)!, j = 0
    double sum = T;
    for (int j = 1; j <= n; ++j) {
        term *= -kappa * T * delta / (j + 1);
        sum += term;
    }
    return sum;
}

double vasicek_a(double kappa, double theta, double gamma, double T) {
    double B = b_delta(kappa, 1.0, T);
    double g2 = gamma * gamma;
    return std::exp((theta - g2 / (2.0 * kappa * kappa)) * (B - T) -
                    g2 / (4.0 * kappa) * B * B);
}

TruncatedSignature lift_term_structure(const TruncatedSignature& sig_xc,
                                       const GSParams& params,
                                       std::optional<int> trunc_order) {
    if (sig_xc.dim != 2)
        throw std::invalid_argument("lift_term_structure: expected a 2-letter signature");
    int d = static_cast<int>(params.maturities.size());
    std::vector<double> L(static_cast<std::size_t>(d) * 2);
    for (int k = 0; k < d; ++k) {
        double T = params.maturities[k];
        double b = trunc_order ? b_trunc(params.kappa, params.delta, T, *trunc_order)
                               : b_delta(params.kappa, params.delta, T);
        L[k * 2 + 0] = 1.0;
        L[k * 2 + 1] = -b;
    }
    return apply_linear_map(sig_xc, L, d);
}

TruncatedSignature signature_approx(const GSParams& params, const BrownianDriver& driver,
                                    int n, int depth) {
    if (n > 12) throw std::invalid_argument("signature_approx: n must be <= 12");
    HatTerms hat = simulate_hat_terms(params, driver, n);
    GSPaths approx = assemble_approx(params, hat, n);
    MultiPath pair = zip_paths({&approx.x, &approx.c});
    return lift_term_structure(signature(pair, depth), params, n / 2);
}

ExpansionBasis expansion_basis(const GSParams& params, const BrownianDriver& driver,
                               int depth) {
    params.validate();
    if (depth > 4)
        throw std::invalid_argument("expansion_basis: depth must be <= 4 (term count)");
    int n = driver.steps;
    double h = driver.dt();

    std::vector<double> w1(n + 1, 0.0);
    for (int i = 0; i < n; ++i) w1[i + 1] = w1[i] + driver.dw1[i];

    std::vector<std::vector<double>> comp(kBasisDim);
    auto& spot = comp[0];
    spot.resize(n + 1);
    double a0 = params.c - params.r + 0.5 * params.sigma * params.sigma;
    for (int i = 0; i <= n; ++i) spot[i] = params.x0 - a0 * (i * h) + params.sigma * w1[i];

    comp[4] = time_kernel_integral(driver, 0);  // unit c-hat1 = W^2
    comp[5].resize(n + 1);                      // unit c-hat2 = t
    for (int i = 0; i <= n; ++i) comp[5][i] = i * h;
    comp[6] = time_kernel_integral(driver, 1);  // unit c-hat3 = -U1
    for (double& v : comp[6]) v = -v;
    for (int j = 0; j < 3; ++j) {               // unit x-hat_j = -int c-hat_j ds
        comp[1 + j] = cum_trapezoid(comp[4 + j], h);
        for (double& v : comp[1 + j]) v = -v;
    }

    MultiPath path;
    path.dim = kBasisDim;
    path.times = driver.grid();
    path.values.resize(static_cast<std::size_t>(n + 1) * kBasisDim);
    for (int i = 0; i <= n; ++i)
        for (int k = 0; k < kBasisDim; ++k) path.value(i, k) = comp[k][i];

    ExpansionBasis out;
    out.depth = depth;
    out.sig = signature(path, depth);
    return out;
}

double Monomial::eval(const GSParams& p) const {
    double v = 1.0;
    for (int i = 0; i < pow_gamma; ++i) v *= p.gamma;
    for (int i = 0; i < pow_kappa; ++i) v *= p.kappa;
    for (int i = 0; i < pow_thc; ++i) v *= (p.theta - p.c);
    return v;
}

std::string Monomial::str() const {
    auto factor = [](const std::string& name, int pow) -> std::string {
        if (pow == 0) return "";
        if (pow == 1) return name;
        return name + "^" + std::to_string(pow);
    };
    std::string out;
    for (const std::string& f :
         {factor("gamma", pow_gamma), factor("kappa", pow_kappa), factor("(theta-c)", pow_thc)}) {
        if (f.empty()) continue;
        if (!out.empty()) out += "*";
        out += f;
    }
    return out.empty() ? "1" : out;
}

namespace {

// Per-slot option: a half order, the coefficient monomial, a maturity-only
// structure factor, and the basis letter the slot integrates against.
struct SlotOption {
    int q;
    Monomial mono;
    double structure;
    int letter;  // 1-based into the 7-letter basis
};

std::vector<SlotOption> slot_options(double T, int budget) {
    std::vector<SlotOption> opts;
    // spot slots
    opts.push_back({0, {}, 1.0, 1});
    if (budget >= 1) opts.push_back({1, {1, 0, 0}, 1.0, 2});
    if (budget >= 2) opts.push_back({2, {0, 1, 1}, 1.0, 3});
    if (budget >= 3) opts.push_back({3, {1, 1, 0}, 1.0, 4});
    // yield slots carry -B(T) from dF = dX - B(T) dC; expanding the truncated
    // factor -B^(1)(T) = -T + delta kappa T^2/2 splits each slot into the
    // base branch and an order-delta correction branch
    if (budget >= 1) opts.push_back({1, {1, 0, 0}, -T, 5});
    if (budget >= 2) opts.push_back({2, {0, 1, 1}, -T, 6});
    if (budget >= 3) {
        opts.push_back({3, {1, 1, 0}, -T, 7});
        opts.push_back({3, {1, 1, 0}, T * T / 2.0, 5});
    }
    return opts;
}

void enumerate(const Word& term_word, const GSParams& params, int max_half_order, int slot,
               int used, Monomial mono, double structure, std::vector<int>& letters,
               std::vector<ExpansionAddend>& out) {
    if (slot == term_word.length()) {
        ExpansionAddend a;
        a.half_order = used;
        a.monomial = mono;
        a.structure = structure;
        a.basis_word.letters = letters;
        out.push_back(std::move(a));
        return;
    }
    double T = params.maturities.at(term_word.letters[slot] - 1);
    for (const SlotOption& opt : slot_options(T, max_half_order - used)) {
        Monomial m = mono;
        m.pow_gamma += opt.mono.pow_gamma;
        m.pow_kappa += opt.mono.pow_kappa;
        m.pow_thc += opt.mono.pow_thc;
        letters.push_back(opt.letter);
        enumerate(term_word, params, max_half_order, slot + 1, used + opt.q, m,
                  structure * opt.structure, letters, out);
        letters.pop_back();
    }
}

}  // namespace

std::vector<ExpansionAddend> expansion_addends(const Word& term_word, const GSParams& params,
                                               int max_half_order) {
    std::vector<ExpansionAddend> out;
    std::vector<int> letters;
    enumerate(term_word, params, max_half_order, 0, 0, {}, 1.0, letters, out);
    return out;
}

ExpansionParts expansion_parts(const ExpansionBasis& basis, const GSParams& params,
                               int depth) {
    if (depth > basis.depth)
        throw std::invalid_argument("expansion_parts: depth exceeds basis depth");
    int d = static_cast<int>(params.maturities.size());
    ExpansionParts parts;
    parts.dim = d;
    parts.depth = depth;
    parts.per_word.assign(total_size(d, depth), {});
    parts.per_word[0][0] = 1.0;  // level-0 coordinate
    for (int level = 1; level <= depth; ++level) {
        std::size_t base = level_offset(d, level);
        for (std::size_t k = 0; k < level_size(d, level); ++k) {
            Word w = word_at(k, d, level);
            for (const ExpansionAddend& a : expansion_addends(w, params)) {
                parts.per_word[base + k][a.half_order] +=
                    a.monomial.eval(params) * a.structure * basis.sig.coeff(a.basis_word);
            }
        }
    }
    return parts;
}

TruncatedSignature expansion_eval(const ExpansionBasis& basis, const GSParams& params,
                                  double delta, int depth) {
    ExpansionParts parts = expansion_parts(basis, params, depth);
    int d = parts.dim;
    TruncatedSignature out = TruncatedSignature::identity(d, depth);
    double sd = std::sqrt(delta);
    for (int level = 1; level <= depth; ++level) {
        std::size_t base = level_offset(d, level);
        for (std::size_t k = 0; k < level_size(d, level); ++k) {
            double acc = 0.0;
            double w = 1.0;
            for (int q = 0; q <= kMaxHalfOrder; ++q) {
                acc += w * parts.per_word[base + k][q];
                w *= sd;
            }
            out.levels[level][k] = acc;
        }
    }
    return out;
}

std::vector<ExpansionTerm> collect_expansion_terms(std::span<const ExpansionBasis> bases,
                                                   const GSParams& params, int depth) {
    if (bases.empty()) throw std::invalid_argument("collect_expansion_terms: no bases");
    int d = static_cast<int>(params.maturities.size());
    std::size_t words = total_size(d, depth);
    std::size_t R = bases.size();

    std::map<std::pair<int, Monomial>, std::size_t> slot_of;
    std::vector<ExpansionTerm> terms;
    auto term_slot = [&](int q, const Monomial& m) -> ExpansionTerm& {
        auto key = std::make_pair(q, m);
        auto it = slot_of.find(key);
        if (it == slot_of.end()) {
            it = slot_of.emplace(key, terms.size()).first;
            ExpansionTerm t;
            t.half_order = q;
            t.monomial = m;
            t.samples.assign(words, std::vector<double>(R, 0.0));
            terms.push_back(std::move(t));
        }
        return terms[it->second];
    };
    term_slot(0, Monomial{});  // ensure the base term exists
    for (std::size_t r = 0; r < R; ++r) terms[0].samples[0][r] = 1.0;

    for (int level = 1; level <= depth; ++level) {
        std::size_t base = level_offset(d, level);
        for (std::size_t k = 0; k < level_size(d, level); ++k) {
            Word w = word_at(k, d, level);
            for (const ExpansionAddend& a : expansion_addends(w, params)) {
                ExpansionTerm& t = term_slot(a.half_order, a.monomial);
                for (std::size_t r = 0; r < R; ++r)
                    t.samples[base + k][r] += a.structure * bases[r].sig.coeff(a.basis_word);
            }
        }
    }
    return terms;
}

}  // namespace sigpert
