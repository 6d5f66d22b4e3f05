#include "sigpert/gs_model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "sigpert/perturb.hpp"

namespace sigpert {

void GSParams::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("GSParams: " + what); };
    if (!(sigma > 0.0)) fail("sigma must be > 0");
    if (!(gamma >= 0.0)) fail("gamma must be >= 0");
    if (!(kappa > 0.0)) fail("kappa must be > 0");
    if (!(rho > -1.0 && rho < 1.0)) fail("rho must lie in (-1,1)");
    if (!(delta >= 0.0 && delta <= 1.0)) fail("delta must lie in [0,1]");
    if (maturities.empty()) fail("maturities must be nonempty");
    double prev = 0.0;
    for (double T : maturities) {
        if (!(T > prev)) fail("maturities must be strictly increasing and positive");
        prev = T;
    }
    for (double v : {r, s, sigma, kappa, theta, gamma, rho, c, x0, delta})
        if (!std::isfinite(v)) fail("non-finite parameter");
}

std::uint64_t split_seed(std::uint64_t base, std::uint64_t index) {
    // splitmix64 step applied to base + index * odd constant
    std::uint64_t z = base + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

BrownianDriver BrownianDriver::make(std::uint64_t seed, int steps, double rho) {
    if (steps < 2) throw std::invalid_argument("BrownianDriver: steps must be >= 2");
    if (!(rho > -1.0 && rho < 1.0))
        throw std::invalid_argument("BrownianDriver: rho must lie in (-1,1)");
    BrownianDriver d;
    d.seed = seed;
    d.steps = steps;
    d.rho = rho;
    d.dw1.resize(steps);
    d.dw2.resize(steps);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double sdt = std::sqrt(1.0 / steps);
    double orth = std::sqrt(1.0 - rho * rho);
    for (int i = 0; i < steps; ++i) {
        double z1 = normal(gen);
        double z2 = normal(gen);
        d.dw1[i] = sdt * z1;
        d.dw2[i] = sdt * (rho * z1 + orth * z2);
    }
    return d;
}

std::vector<double> BrownianDriver::grid() const {
    std::vector<double> t(steps + 1);
    for (int i = 0; i <= steps; ++i) t[i] = static_cast<double>(i) / steps;
    return t;
}

std::vector<double> cum_trapezoid(const std::vector<double>& y, double dt) {
    std::vector<double> out(y.size(), 0.0);
    for (std::size_t i = 1; i < y.size(); ++i)
        out[i] = out[i - 1] + 0.5 * dt * (y[i - 1] + y[i]);
    return out;
}

std::vector<double> time_kernel_integral(const BrownianDriver& driver, int k) {
    if (k < 0) throw std::invalid_argument("time_kernel_integral: k must be >= 0");
    int n = driver.steps;
    double h = driver.dt();
    // I(t_i) = sum_{j<i} (t_i - t_j)^k dW_j = sum_a C(k,a) t_i^{k-a} (-1)^a M_a(t_i)
    // with running moments M_a(t_i) = sum_{j<i} t_j^a dW_j.
    std::vector<std::vector<double>> moments(k + 1, std::vector<double>(n + 1, 0.0));
    for (int a = 0; a <= k; ++a) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += std::pow(i * h, a) * driver.dw2[i];
            moments[a][i + 1] = acc;
        }
    }
    std::vector<double> binom(k + 1, 1.0);
    for (int a = 1; a <= k; ++a) binom[a] = binom[a - 1] * (k - a + 1) / a;
    std::vector<double> out(n + 1, 0.0);
    for (int i = 1; i <= n; ++i) {
        double t = i * h;
        double acc = 0.0;
        double sign = 1.0;
        for (int a = 0; a <= k; ++a) {
            acc += sign * binom[a] * std::pow(t, k - a) * moments[a][i];
            sign = -sign;
        }
        out[i] = acc;
    }
    return out;
}

GSPaths simulate_gs(const GSParams& params, const BrownianDriver& driver) {
    params.validate();
    if (driver.steps < (1 << 8))
        throw std::invalid_argument("simulate_gs: driver grid too coarse (need N >= 256)");
    int n = driver.steps;
    double h = driver.dt();
    double dk = params.delta * params.kappa;
    double sd = std::sqrt(params.delta);

    // C_t = theta + (c - theta) e^{-dk t} + sqrt(delta) gamma I_t with the
    // left-point convolution I updated recursively (exact same values as the
    // direct sum).
    std::vector<double> cpath(n + 1);
    double decay = std::exp(-dk * h);
    double conv = 0.0;
    cpath[0] = params.c;
    for (int i = 0; i < n; ++i) {
        conv = decay * (conv + driver.dw2[i]);
        double t = (i + 1) * h;
        cpath[i + 1] = params.theta + (params.c - params.theta) * std::exp(-dk * t) +
                       sd * params.gamma * conv;
    }

    std::vector<double> xpath(n + 1);
    xpath[0] = params.x0;
    double drift = params.r - 0.5 * params.sigma * params.sigma;
    for (int i = 0; i < n; ++i)
        xpath[i + 1] = xpath[i] + drift * h - 0.5 * h * (cpath[i] + cpath[i + 1]) +
                       params.sigma * driver.dw1[i];

    GSPaths out;
    out.x.dim = 1;
    out.x.times = driver.grid();
    out.x.values = std::move(xpath);
    out.c.dim = 1;
    out.c.times = out.x.times;
    out.c.values = std::move(cpath);
    return out;
}

HatTerms simulate_hat_terms(const GSParams& params, const BrownianDriver& driver, int j_max) {
    params.validate();
    if (j_max < 0 || j_max > 12)
        throw std::invalid_argument("simulate_hat_terms: j_max must lie in [0,12]");
    int n = driver.steps;
    double h = driver.dt();
    HatTerms out;
    out.times = driver.grid();
    out.c_hat.resize(j_max + 1);
    out.x_hat.resize(j_max + 1);

    out.c_hat[0].assign(n + 1, params.c);
    std::vector<double> w1(n + 1, 0.0);
    for (int i = 0; i < n; ++i) w1[i + 1] = w1[i] + driver.dw1[i];
    out.x_hat[0].resize(n + 1);
    double a0 = params.c - params.r + 0.5 * params.sigma * params.sigma;
    for (int i = 0; i <= n; ++i)
        out.x_hat[0][i] = params.x0 - a0 * (i * h) + params.sigma * w1[i];

    for (int j = 1; j <= j_max; ++j) {
        auto& ch = out.c_hat[j];
        if (j % 2 == 1) {
            int k = (j - 1) / 2;
            double f = 1.0;
            for (int i = 2; i <= k; ++i) f *= i;
            double coeff = params.gamma * std::pow(-params.kappa, k) / f;
            ch = time_kernel_integral(driver, k);
            for (double& v : ch) v *= coeff;
        } else {
            int k = (j - 2) / 2;
            double f = 1.0;
            for (int i = 2; i <= k + 1; ++i) f *= i;
            double coeff = (params.c - params.theta) * std::pow(-params.kappa, k + 1) / f;
            ch.resize(n + 1);
            for (int i = 0; i <= n; ++i) ch[i] = coeff * std::pow(i * h, k + 1);
        }
        out.x_hat[j] = cum_trapezoid(ch, h);
        for (double& v : out.x_hat[j]) v = -v;
    }
    return out;
}

GSPaths assemble_approx(const GSParams& params, const HatTerms& hat, int n) {
    if (n < 0 || static_cast<std::size_t>(n) >= hat.c_hat.size())
        throw std::invalid_argument("assemble_approx: hat terms missing orders up to n");
    double sd = std::sqrt(params.delta);
    std::size_t pts = hat.times.size();
    std::vector<double> cpath(hat.c_hat[0]);
    std::vector<double> xpath(hat.x_hat[0]);
    double w = 1.0;
    for (int j = 1; j <= n; ++j) {
        w *= sd;
        for (std::size_t i = 0; i < pts; ++i) {
            cpath[i] += w * hat.c_hat[j][i];
            xpath[i] += w * hat.x_hat[j][i];
        }
    }
    GSPaths out;
    out.x.dim = 1;
    out.x.times = hat.times;
    out.x.values = std::move(xpath);
    out.c.dim = 1;
    out.c.times = hat.times;
    out.c.values = std::move(cpath);
    return out;
}

MultiPath futures_returns(const MultiPath& x, const MultiPath& c, const GSParams& params) {
    if (x.times != c.times) throw std::invalid_argument("futures_returns: grid mismatch");
    int d = static_cast<int>(params.maturities.size());
    MultiPath out;
    out.dim = d;
    out.times = x.times;
    out.values.resize(x.points() * static_cast<std::size_t>(d));
    std::vector<double> b(d);
    for (int k = 0; k < d; ++k)
        b[k] = b_delta(params.kappa, params.delta, params.maturities[k]);
    for (std::size_t i = 0; i < x.points(); ++i)
        for (int k = 0; k < d; ++k)
            out.value(i, k) = x.value(i, 0) - b[k] * c.value(i, 0);
    return out;
}

double ou_mean(const GSParams& params, double t) {
    double e = std::exp(-params.delta * params.kappa * t);
    return params.c * e + params.theta * (1.0 - e);
}

double ou_var(const GSParams& params, double t) {
    double dk = params.delta * params.kappa;
    if (dk == 0.0) return 0.0;
    return params.delta * params.gamma * params.gamma * (1.0 - std::exp(-2.0 * dk * t)) /
           (2.0 * dk);
}

}  // namespace sigpert
