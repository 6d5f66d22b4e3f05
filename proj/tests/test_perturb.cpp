#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "sigpert/metrics.hpp"
#include "sigpert/perturb.hpp"
#include "sigpert/util.hpp"

using namespace sigpert;

namespace {

GSParams test_params() {
    GSParams p;
    p.r = 0.05;
    p.s = 0.0;
    p.sigma = 0.2;
    p.kappa = 0.5;
    p.theta = 0.05;
    p.gamma = 0.1;
    p.rho = 0.3;
    p.c = 0.15;
    p.x0 = 0.0;
    p.delta = 1.0;
    p.maturities = {0.5, 1.0};
    return p;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("maturity factor closed form and truncations") {
    SUBCASE("delta=0 limit is T") {
        CHECK(b_delta(1.3, 0.0, 0.7) == 0.7);
        CHECK(b_trunc(1.3, 0.4, 0.7, 0) == 0.7);
    }
    SUBCASE("kappa=1, delta=1, T=1") {
        CHECK(b_delta(1.0, 1.0, 1.0) == doctest::Approx(0.6321206).epsilon(1e-7));
        CHECK(b_trunc(1.0, 1.0, 1.0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("small-argument Taylor remainder") {
        for (double x : {1e-2, 1e-3, 1e-4}) {
            double kappa = 0.8, T = 1.3, delta = x / (kappa * T);
            double approx = T - delta * kappa * T * T / 2.0;
            double rel = std::abs(b_delta(kappa, delta, T) - approx) / T;
            CHECK(rel < x * x / 6.0);
        }
    }
    SUBCASE("alternating-series truncation bound on a grid") {
        double fact[16];
        fact[0] = 1.0;
        for (int i = 1; i < 16; ++i) fact[i] = fact[i - 1] * i;
        for (double kappa : {0.5, 1.0, 2.0})
            for (double delta : {0.125, 0.5, 1.0})
                for (double T : {0.25, 1.0, 2.0})
                    for (int n : {0, 1, 2, 3, 5}) {
                        double err = std::abs(b_delta(kappa, delta, T) -
                                              b_trunc(kappa, delta, T, n));
                        double bound = std::pow(delta * kappa, n + 1) *
                                       std::pow(T, n + 2) / fact[n + 2];
                        CHECK(err <= bound * (1 + 1e-12) + 1e-15);
                    }
    }
}

TEST_CASE("vasicek_a closed form and Monte Carlo bond oracle") {
    SUBCASE("degenerate exponents") {
        CHECK(vasicek_a(1.0, 0.0, 0.0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(vasicek_a(0.7, 0.04, 0.3, 1e-12) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("kappa=1, theta=0.05, gamma=0.3, T=1 against MC") {
        double A = vasicek_a(1.0, 0.05, 0.3, 1.0);
        CHECK(A == doctest::Approx(0.98922856564858).epsilon(1e-12));
        GSParams p = test_params();
        p.kappa = 1.0;
        p.theta = 0.05;
        p.gamma = 0.3;
        p.delta = 1.0;
        p.c = 0.1;
        double B = b_delta(1.0, 1.0, 1.0);
        double target = A * std::exp(-B * p.c);
        std::size_t R = 40000;
        int steps = 1 << 10;
        std::vector<double> disc(R);
        parallel_for(R, [&](std::size_t r) {
            BrownianDriver drv = BrownianDriver::make(split_seed(91, r), steps, p.rho);
            GSPaths gs = simulate_gs(p, drv);
            double integral = 0.0;
            for (int i = 0; i < steps; ++i)
                integral += 0.5 * (gs.c.value(i, 0) + gs.c.value(i + 1, 0)) / steps;
            disc[r] = std::exp(-integral);
        });
        double mean = sample_mean(disc);
        double se = sample_se(disc);
        CHECK(std::abs(mean - target) < 3 * se + 1e-4);
    }
}

TEST_CASE("lift_term_structure") {
    GSParams p = test_params();
    BrownianDriver drv = BrownianDriver::make(13, 1 << 10, p.rho);
    GSPaths gs = simulate_gs(p, drv);
    MultiPath pair = zip_paths({&gs.x, &gs.c});
    TruncatedSignature sig_xc = signature(pair, 3);

    SUBCASE("vanishing maturities collapse onto spot words") {
        GSParams tiny = p;
        tiny.maturities = {1e-13, 2e-13};
        TruncatedSignature lifted = lift_term_structure(sig_xc, tiny);
        for (int level = 1; level <= 3; ++level) {
            Word spot;
            spot.letters.assign(level, 1);
            double target = sig_xc.coeff(spot);
            for (double v : lifted.levels[level])
                CHECK(v == doctest::Approx(target).epsilon(1e-8));
        }
    }
    SUBCASE("d=1 level-2 expansion by hand") {
        GSParams one = p;
        one.maturities = {0.75};
        double b = b_delta(one.kappa, one.delta, 0.75);
        TruncatedSignature lifted = lift_term_structure(sig_xc, one);
        double expected = sig_xc.coeff(Word{{1, 1}}) -
                          b * (sig_xc.coeff(Word{{1, 2}}) + sig_xc.coeff(Word{{2, 1}})) +
                          b * b * sig_xc.coeff(Word{{2, 2}});
        CHECK(lifted.coeff(Word{{1, 1}}) == doctest::Approx(expected).epsilon(1e-13));
    }
    SUBCASE("dual route against the direct futures signature") {
        GSParams wide = p;
        wide.maturities = {0.25, 0.5, 1.0};
        double max_dev = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            BrownianDriver d2 = BrownianDriver::make(split_seed(500, seed), 1 << 10, p.rho);
            GSPaths g2 = simulate_gs(wide, d2);
            MultiPath pr = zip_paths({&g2.x, &g2.c});
            TruncatedSignature lifted = lift_term_structure(signature(pr, 4), wide);
            TruncatedSignature direct = signature(futures_returns(g2.x, g2.c, wide), 4);
            for (int level = 1; level <= 4; ++level)
                for (std::size_t i = 0; i < lifted.levels[level].size(); ++i)
                    max_dev = std::max(max_dev, std::abs(lifted.levels[level][i] -
                                                         direct.levels[level][i]));
        }
        CHECK(max_dev < 1e-8);
    }
    SUBCASE("wrong input alphabet throws") {
        TruncatedSignature s3 = TruncatedSignature::identity(3, 2);
        CHECK_THROWS_AS(lift_term_structure(s3, p), std::invalid_argument);
    }
}

TEST_CASE("signature_approx") {
    GSParams p = test_params();
    SUBCASE("n=0 carries the constant-yield structure") {
        BrownianDriver drv = BrownianDriver::make(3, 1 << 9, p.rho);
        TruncatedSignature s = signature_approx(p, drv, 0, 3);
        // B^(0)(T) = T differs per word, but C^(0) is constant so every word of
        // a given length equals the pure-spot coordinate
        for (int level = 1; level <= 3; ++level) {
            double first = s.levels[level][0];
            for (double v : s.levels[level])
                CHECK(v == doctest::Approx(first).epsilon(1e-10));
        }
    }
    SUBCASE("order cap") {
        BrownianDriver drv = BrownianDriver::make(3, 1 << 9, p.rho);
        CHECK_THROWS_AS(signature_approx(p, drv, 13, 2), std::invalid_argument);
    }
    SUBCASE("n=0 vs n=1 level-1 gap scales exactly as sqrt(delta)*gamma") {
        BrownianDriver drv = BrownianDriver::make(40, 1 << 9, p.rho);
        auto level1_gap = [&](double delta, double gamma) {
            GSParams q = p;
            q.delta = delta;
            q.gamma = gamma;
            TruncatedSignature s0 = signature_approx(q, drv, 0, 1);
            TruncatedSignature s1 = signature_approx(q, drv, 1, 1);
            return s1.levels[1][0] - s0.levels[1][0];
        };
        double ref = level1_gap(1.0, 1.0);
        for (double delta : {0.25, 0.0625})
            for (double gamma : {0.1, 0.3})
                CHECK(level1_gap(delta, gamma) ==
                      doctest::Approx(std::sqrt(delta) * gamma * ref).epsilon(1e-12));
    }
    SUBCASE("n=12 at delta=1 matches the full signature to 1e-2 relative") {
        for (std::uint64_t seed : {21, 22, 23}) {
            BrownianDriver drv = BrownianDriver::make(seed, 1 << 10, p.rho);
            TruncatedSignature ap = signature_approx(p, drv, 12, 3);
            GSPaths gs = simulate_gs(p, drv);
            TruncatedSignature full = signature(futures_returns(gs.x, gs.c, p), 3);
            double num = 0.0, den = 0.0;
            for (int level = 1; level <= 3; ++level)
                for (std::size_t i = 0; i < full.levels[level].size(); ++i) {
                    num += std::pow(ap.levels[level][i] - full.levels[level][i], 2);
                    den += std::pow(full.levels[level][i], 2);
                }
            CHECK(std::sqrt(num / den) < 1e-2);
        }
    }
}

TEST_CASE("expansion basis: parameter independence and closed forms") {
    GSParams p = test_params();
    BrownianDriver drv = BrownianDriver::make(71, 1 << 10, p.rho);
    ExpansionBasis basis = expansion_basis(p, drv, 3);

    SUBCASE("bit-identical under gamma, kappa, theta changes") {
        GSParams q = p;
        q.gamma = 2 * p.gamma;
        q.kappa = 3.7;
        q.theta = -0.2;
        ExpansionBasis other = expansion_basis(q, drv, 3);
        for (int level = 0; level <= 3; ++level)
            for (std::size_t i = 0; i < basis.sig.levels[level].size(); ++i)
                CHECK(bit_equal(basis.sig.levels[level][i], other.sig.levels[level][i]));
    }
    SUBCASE("pure time-squared words give (-1/2)^k / k!") {
        // letter 3 is the unit path -t^2/2
        for (int k = 1; k <= 3; ++k) {
            Word w;
            w.letters.assign(k, 3);
            double fact = 1.0;
            for (int i = 2; i <= k; ++i) fact *= i;
            CHECK(basis.sig.coeff(w) ==
                  doctest::Approx(std::pow(-0.5, k) / fact).epsilon(1e-10));
            // magnitude times 2^k recovers 1/k!
            CHECK(std::abs(basis.sig.coeff(w)) * std::pow(2.0, k) ==
                  doctest::Approx(1.0 / fact).epsilon(1e-10));
        }
    }
    SUBCASE("first-order kernel statistics: mean 0, variance 1/3") {
        std::size_t R = 20000;
        std::vector<double> terminal(R);
        parallel_for(R, [&](std::size_t r) {
            BrownianDriver d = BrownianDriver::make(split_seed(99, r), 512, p.rho);
            ExpansionBasis b = expansion_basis(p, d, 1);
            terminal[r] = b.sig.levels[1][1];  // unit x-hat1 = -int W^2 ds endpoint
        });
        double m = sample_mean(terminal);
        CHECK(std::abs(m) < 3 * sample_se(terminal));
        double var = 0.0;
        for (double v : terminal) var += (v - m) * (v - m);
        var /= (R - 1);
        CHECK(std::abs(var - 1.0 / 3.0) < 3 * var * std::sqrt(2.0 / (R - 1)));
    }
    SUBCASE("depth cap") { CHECK_THROWS_AS(expansion_basis(p, drv, 5), std::invalid_argument); }
}

TEST_CASE("expansion parts: exact monomial structure") {
    GSParams p = test_params();
    BrownianDriver drv = BrownianDriver::make(87, 1 << 9, p.rho);
    ExpansionBasis basis = expansion_basis(p, drv, 3);
    ExpansionParts parts = expansion_parts(basis, p, 3);

    SUBCASE("order-sqrt(delta) part scales exactly linearly in gamma") {
        GSParams q = p;
        q.gamma = 2 * p.gamma;
        ExpansionParts doubled = expansion_parts(basis, q, 3);
        for (std::size_t w = 0; w < parts.per_word.size(); ++w) {
            CHECK(bit_equal(doubled.per_word[w][0], parts.per_word[w][0]));
            CHECK(bit_equal(doubled.per_word[w][1], 2 * parts.per_word[w][1]));
        }
    }
    SUBCASE("order-delta part invariant under (kappa, theta-c) -> (2kappa, (theta-c)/2)") {
        // dyadic scalars so the halving itself is exact in floating point
        GSParams a = p;
        a.c = 0.25;
        a.theta = 0.75;
        a.kappa = 0.5;
        GSParams b = a;
        b.kappa = 2 * a.kappa;
        b.theta = a.c + (a.theta - a.c) / 2;
        ExpansionParts pa = expansion_parts(basis, a, 3);
        ExpansionParts pb = expansion_parts(basis, b, 3);
        for (std::size_t w = 0; w < pa.per_word.size(); ++w)
            CHECK(bit_equal(pb.per_word[w][2], pa.per_word[w][2]));
    }
    SUBCASE("three-point collinearity of the order-sqrt(delta) coordinate") {
        std::vector<double> gammas{0.1, 0.2, 0.4};
        for (std::size_t w = 0; w < parts.per_word.size(); ++w) {
            std::vector<double> vals;
            for (double g : gammas) {
                GSParams q = p;
                q.gamma = g;
                vals.push_back(expansion_parts(basis, q, 3).per_word[w][1]);
            }
            double interp = vals[0] + (vals[2] - vals[0]) / 3.0;
            CHECK(std::abs(vals[1] - interp) <= 1e-12 * (std::abs(vals[1]) + 1e-30));
        }
    }
    SUBCASE("degenerate yield block leaves only base-order content") {
        GSParams q = p;
        q.gamma = 0.0;
        q.theta = q.c;
        ExpansionParts deg = expansion_parts(basis, q, 3);
        for (std::size_t w = 0; w < deg.per_word.size(); ++w)
            for (int qq = 1; qq <= kMaxHalfOrder; ++qq)
                CHECK(deg.per_word[w][qq] == 0.0);
    }
}

TEST_CASE("expansion terms: grouped samples and labels") {
    GSParams p = test_params();
    std::vector<ExpansionBasis> bases;
    for (std::uint64_t s = 0; s < 4; ++s)
        bases.push_back(
            expansion_basis(p, BrownianDriver::make(split_seed(7, s), 512, p.rho), 2));
    auto terms = collect_expansion_terms(bases, p, 2);

    SUBCASE("expected monomials appear") {
        bool base = false, half_gamma = false, one_gamma2 = false, one_ktc = false,
             three_gk = false;
        for (const auto& t : terms) {
            std::string m = t.monomial.str();
            if (t.half_order == 0 && m == "1") base = true;
            if (t.half_order == 1 && m == "gamma") half_gamma = true;
            if (t.half_order == 2 && m == "gamma^2") one_gamma2 = true;
            if (t.half_order == 2 && m == "kappa*(theta-c)") one_ktc = true;
            if (t.half_order == 3 && m == "gamma*kappa") three_gk = true;
        }
        CHECK(base);
        CHECK(half_gamma);
        CHECK(one_gamma2);
        CHECK(one_ktc);
        CHECK(three_gk);
    }
    SUBCASE("samples bit-identical under parameter changes") {
        GSParams q = p;
        q.gamma = 0.33;
        q.kappa = 1.9;
        q.theta = 0.4;
        auto other = collect_expansion_terms(bases, q, 2);
        REQUIRE(other.size() == terms.size());
        for (std::size_t i = 0; i < terms.size(); ++i)
            for (std::size_t w = 0; w < terms[i].samples.size(); ++w)
                for (std::size_t r = 0; r < terms[i].samples[w].size(); ++r)
                    CHECK(bit_equal(terms[i].samples[w][r], other[i].samples[w][r]));
    }
}

TEST_CASE("expansion_eval tracks the order-3 approximant as delta shrinks") {
    GSParams p = test_params();
    WeightSpec ws = WeightSpec::standard(3);
    std::size_t R = 60;
    auto residual_norm = [&](double delta) {
        GSParams pd = p;
        pd.delta = delta;
        std::vector<TruncatedSignature> diffs(R);
        parallel_for(R, [&](std::size_t r) {
            BrownianDriver drv = BrownianDriver::make(split_seed(1234, r), 1 << 10, p.rho);
            ExpansionBasis basis = expansion_basis(pd, drv, 3);
            TruncatedSignature ev = expansion_eval(basis, pd, delta, 3);
            TruncatedSignature ap = signature_approx(pd, drv, 3, 3);
            for (int level = 0; level <= 3; ++level)
                for (std::size_t i = 0; i < ev.levels[level].size(); ++i)
                    ap.levels[level][i] -= ev.levels[level][i];
            ap.levels[0][0] = 1.0;  // keep a valid signature container
            diffs[r] = ap;
        });
        SigSequenceSample sample = SigSequenceSample::from_signatures(diffs);
        for (double& v : sample.samples[0]) v = 0.0;  // level-0 difference is zero
        return weighted_sig_norm(sample, 2.0, ws).value;
    };
    double at16 = residual_norm(1.0 / 16);
    double at64 = residual_norm(1.0 / 64);
    // dropped terms start at delta^2: the norm should shrink ~16x per 4x in delta
    double ratio = at16 / at64;
    CHECK(ratio > 10.0);
    CHECK(ratio < 24.0);
}

TEST_CASE("first-order coefficient recovered from the full signature is linear in gamma") {
    GSParams p = test_params();
    std::vector<double> gammas{0.1, 0.2, 0.4};
    std::size_t R = 300;
    int depth = 2;
    int steps = 1 << 10;
    std::size_t words = total_size(2, depth);

    // pathwise (S(F^delta) - base order)/sqrt(delta) per word on a shared
    // driver, with a Richardson step across two deltas to strip the
    // next-order contamination
    double d1 = 1.0 / 16, d2 = 1.0 / 256;  // sqrt ratio 4
    auto coef_paths = [&](double gamma) {
        std::vector<std::vector<double>> rich(words, std::vector<double>(R));
        parallel_for(R, [&](std::size_t r) {
            BrownianDriver drv = BrownianDriver::make(split_seed(31337, r), steps, p.rho);
            ExpansionBasis basis = expansion_basis(p, drv, depth);
            std::array<std::vector<double>, 2> at;
            int di = 0;
            for (double delta : {d1, d2}) {
                GSParams pg = p;
                pg.gamma = gamma;
                pg.delta = delta;
                ExpansionParts parts = expansion_parts(basis, pg, depth);
                GSPaths gs = simulate_gs(pg, drv);
                TruncatedSignature full = signature(futures_returns(gs.x, gs.c, pg), depth);
                at[di].resize(words);
                std::size_t off = 0;
                for (int level = 0; level <= depth; ++level)
                    for (double v : full.levels[level]) {
                        at[di][off] = (v - parts.per_word[off][0]) / std::sqrt(delta);
                        ++off;
                    }
                ++di;
            }
            for (std::size_t w = 0; w < words; ++w)
                rich[w][r] = (4.0 * at[1][w] - at[0][w]) / 3.0;
        });
        return rich;
    };

    // gamma-stripped basis combination per driver (the regressor)
    std::vector<std::vector<double>> regressor(words, std::vector<double>(R));
    {
        GSParams unit = p;
        unit.gamma = 1.0;
        parallel_for(R, [&](std::size_t r) {
            BrownianDriver drv = BrownianDriver::make(split_seed(31337, r), steps, p.rho);
            ExpansionParts parts = expansion_parts(expansion_basis(unit, drv, depth), unit,
                                                   depth);
            for (std::size_t w = 0; w < words; ++w) regressor[w][r] = parts.per_word[w][1];
        });
    }
    std::vector<double> loading;
    for (double gamma : gammas) {
        auto coefs = coef_paths(gamma);
        double num = 0.0, den = 0.0;
        for (std::size_t w = 1; w < words; ++w)
            for (std::size_t r = 0; r < R; ++r) {
                num += coefs[w][r] * regressor[w][r];
                den += regressor[w][r] * regressor[w][r];
            }
        loading.push_back(num / den);
    }
    // loading(gamma) ~ gamma within the 5% fit tolerance
    double interp = (2.0 / 3.0) * loading[0] + (1.0 / 3.0) * loading[2];
    CHECK(std::abs(loading[1] - interp) / std::abs(loading[1]) < 0.05);
    for (std::size_t gi = 0; gi < gammas.size(); ++gi)
        CHECK(std::abs(loading[gi] / gammas[gi] - 1.0) < 0.05);
}
