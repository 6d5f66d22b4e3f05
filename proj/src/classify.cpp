#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "sigpert/harness.hpp"
#include "sigpert/util.hpp"

namespace sigpert::harness {

namespace {

// per-market feature: per-word mean of the window signatures, levels 1..depth
std::vector<double> market_features(const GSParams& params, const BrownianDriver& driver,
                                    int windows, int depth) {
    GSPaths gs = simulate_gs(params, driver);
    MultiPath fut = futures_returns(gs.x, gs.c, params);
    int d = fut.dim;
    std::size_t feat_len = total_size(d, depth) - 1;
    std::vector<double> acc(feat_len, 0.0);
    int step = driver.steps / windows;
    for (int w = 0; w < windows; ++w) {
        MultiPath win;
        win.dim = d;
        win.times.resize(step + 1);
        win.values.resize(static_cast<std::size_t>(step + 1) * d);
        for (int i = 0; i <= step; ++i) {
            win.times[i] = static_cast<double>(i) / step;
            for (int k = 0; k < d; ++k) win.value(i, k) = fut.value(w * step + i, k);
        }
        TruncatedSignature sig = signature(win, depth);
        std::size_t off = 0;
        for (int level = 1; level <= depth; ++level)
            for (double v : sig.levels[level]) acc[off++] += v;
    }
    for (double& v : acc) v /= windows;
    return acc;
}

bool models_identical(const GSParams& a, const GSParams& b) {
    return a.r == b.r && a.s == b.s && a.sigma == b.sigma && a.kappa == b.kappa &&
           a.theta == b.theta && a.gamma == b.gamma && a.rho == b.rho && a.c == b.c &&
           a.x0 == b.x0 && a.delta == b.delta && a.maturities == b.maturities;
}

}  // namespace

ClassifyOutcome run_classification(const ClassifyConfig& cc, const DriverSpec& spec) {
    std::size_t n_classes = cc.classes.size();
    if (n_classes < 1) throw ConfigError("config error: classify.classes must be nonempty");
    int d = static_cast<int>(cc.classes.front().model.maturities.size());
    for (const ClassSpec& cs : cc.classes)
        if (static_cast<int>(cs.model.maturities.size()) != d)
            throw ConfigError("config error: classify classes must share the contract count");
    std::size_t per_class = static_cast<std::size_t>(cc.markets_per_class);
    std::size_t total = n_classes * per_class;
    std::size_t feat_len = total_size(d, cc.depth) - 1;

    std::vector<std::vector<double>> feats(total);
    std::vector<int> labels(total);
    parallel_for(total, [&](std::size_t i) {
        std::size_t ci = i / per_class;
        BrownianDriver drv =
            BrownianDriver::make(split_seed(spec.seed, i + 1), spec.steps,
                                 cc.classes[ci].model.rho);
        feats[i] = market_features(cc.classes[ci].model, drv, cc.windows, cc.depth);
        labels[i] = static_cast<int>(ci);
    });

    ClassifyOutcome out;
    out.identical_classes =
        n_classes >= 2 && std::all_of(cc.classes.begin() + 1, cc.classes.end(),
                                      [&](const ClassSpec& cs) {
                                          return models_identical(cs.model,
                                                                  cc.classes.front().model);
                                      });

    // deterministic shuffle, then contiguous folds
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(split_seed(spec.seed, 0x5EED));
    std::shuffle(order.begin(), order.end(), gen);

    std::size_t correct_total = 0;
    for (int fold = 0; fold < cc.folds; ++fold) {
        std::size_t lo = total * fold / cc.folds, hi = total * (fold + 1) / cc.folds;
        std::vector<char> is_test(total, 0);
        for (std::size_t i = lo; i < hi; ++i) is_test[order[i]] = 1;

        // standardize on the training set
        std::vector<double> mu(feat_len, 0.0), sd(feat_len, 0.0);
        std::size_t n_train = 0;
        for (std::size_t i = 0; i < total; ++i) {
            if (is_test[i]) continue;
            ++n_train;
            for (std::size_t k = 0; k < feat_len; ++k) mu[k] += feats[i][k];
        }
        for (std::size_t k = 0; k < feat_len; ++k) mu[k] /= n_train;
        for (std::size_t i = 0; i < total; ++i) {
            if (is_test[i]) continue;
            for (std::size_t k = 0; k < feat_len; ++k) {
                double dlt = feats[i][k] - mu[k];
                sd[k] += dlt * dlt;
            }
        }
        for (std::size_t k = 0; k < feat_len; ++k) {
            sd[k] = std::sqrt(sd[k] / std::max<std::size_t>(n_train - 1, 1));
            if (sd[k] == 0.0) sd[k] = 1.0;
        }

        std::vector<std::vector<double>> centroid(n_classes,
                                                  std::vector<double>(feat_len, 0.0));
        std::vector<std::size_t> counts(n_classes, 0);
        for (std::size_t i = 0; i < total; ++i) {
            if (is_test[i]) continue;
            auto& cen = centroid[labels[i]];
            for (std::size_t k = 0; k < feat_len; ++k)
                cen[k] += (feats[i][k] - mu[k]) / sd[k];
            ++counts[labels[i]];
        }
        for (std::size_t ci = 0; ci < n_classes; ++ci)
            for (double& v : centroid[ci]) v /= std::max<std::size_t>(counts[ci], 1);

        std::size_t correct = 0;
        for (std::size_t i = 0; i < total; ++i) {
            if (!is_test[i]) continue;
            double best = 0.0;
            int best_class = -1;
            for (std::size_t ci = 0; ci < n_classes; ++ci) {
                double dist = 0.0;
                for (std::size_t k = 0; k < feat_len; ++k) {
                    double z = (feats[i][k] - mu[k]) / sd[k] - centroid[ci][k];
                    dist += z * z;
                }
                if (best_class < 0 || dist < best) {
                    best = dist;
                    best_class = static_cast<int>(ci);
                }
            }
            if (best_class == labels[i]) ++correct;
        }
        out.fold_accuracy.push_back(static_cast<double>(correct) /
                                    std::max<std::size_t>(hi - lo, 1));
        correct_total += correct;
    }
    out.accuracy = static_cast<double>(correct_total) / total;

    // per-coordinate discriminability over the full sample: spread of the
    // class means relative to the pooled within-class deviation
    for (std::size_t k = 0; k < feat_len; ++k) {
        std::vector<double> cmean(n_classes, 0.0);
        for (std::size_t i = 0; i < total; ++i) cmean[labels[i]] += feats[i][k];
        for (std::size_t ci = 0; ci < n_classes; ++ci) cmean[ci] /= per_class;
        double within = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            double dlt = feats[i][k] - cmean[labels[i]];
            within += dlt * dlt;
        }
        within = std::sqrt(within / std::max<std::size_t>(total - n_classes, 1));
        double lo = *std::min_element(cmean.begin(), cmean.end());
        double hi = *std::max_element(cmean.begin(), cmean.end());
        CoordStat stat;
        int level = 1;
        std::size_t off = k + 1;
        while (off >= level_offset(d, level + 1)) ++level;
        stat.word = word_at(off - level_offset(d, level), d, level).letters;
        stat.dprime = within > 0.0 ? (hi - lo) / within : 0.0;
        out.discriminability.push_back(std::move(stat));
    }
    return out;
}

int cmd_classify(const Config& cfg) {
    if (!cfg.classify) throw ConfigError("config error: missing field classify");
    const ClassifyConfig& cc = *cfg.classify;
    ClassifyOutcome main_run = run_classification(cc, cfg.driver);

    json warnings = json::array();
    if (main_run.identical_classes)
        warnings.push_back("classes have identical parameter blocks; expect chance accuracy");

    json coords = json::array();
    for (const CoordStat& cs : main_run.discriminability)
        coords.push_back(json{{"word", cs.word}, {"dprime", cs.dprime}});

    json report{{"header", result_header(cfg, "classify")},
                {"classes", json::array()},
                {"accuracy", main_run.accuracy},
                {"fold_accuracy", main_run.fold_accuracy},
                {"chance", 1.0 / cc.classes.size()},
                {"per_coordinate", coords},
                {"warnings", warnings}};
    for (const ClassSpec& cs : cc.classes) report["classes"].push_back(cs.name);

    if (cc.ablation && cc.classes.size() >= 2) {
        ClassifyConfig equalized = cc;
        double g = equalized.classes.front().model.gamma;
        for (ClassSpec& cs : equalized.classes) cs.model.gamma = g;
        ClassifyOutcome ab = run_classification(equalized, cfg.driver);
        report["ablation"] = json{{"gamma", g},
                                  {"accuracy", ab.accuracy},
                                  {"fold_accuracy", ab.fold_accuracy}};
    }

    std::filesystem::path out(cfg.output_dir);
    std::filesystem::create_directories(out);
    std::ofstream f(out / "classification_report.json", std::ios::binary);
    f << report.dump(2) << "\n";
    return kExitOk;
}

}  // namespace sigpert::harness
