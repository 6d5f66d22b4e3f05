#include "sigpert/tensor_sig.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sigpert {

namespace {

void check_dims(int dim, int depth) {
    if (dim < 1) throw std::invalid_argument("tensor_sig: dim must be >= 1");
    if (depth < 0) throw std::invalid_argument("tensor_sig: depth must be >= 0");
    if (depth > kMaxDepth)
        throw std::invalid_argument("tensor_sig: depth exceeds hard ceiling " +
                                    std::to_string(kMaxDepth));
    double cells = std::pow(static_cast<double>(dim), depth);
    if (cells > 2.0e8) throw std::invalid_argument("tensor_sig: dim^depth too large");
}

}  // namespace

std::size_t level_size(int dim, int level) {
    std::size_t n = 1;
    for (int k = 0; k < level; ++k) n *= static_cast<std::size_t>(dim);
    return n;
}

std::size_t level_offset(int dim, int level) {
    std::size_t off = 0;
    for (int k = 0; k < level; ++k) off += level_size(dim, k);
    return off;
}

std::size_t total_size(int dim, int depth) { return level_offset(dim, depth + 1); }

std::size_t word_index(const Word& word, int dim) {
    std::size_t idx = 0;
    for (int letter : word.letters) {
        if (letter < 1 || letter > dim)
            throw std::invalid_argument("word_index: letter out of range");
        idx = idx * static_cast<std::size_t>(dim) + static_cast<std::size_t>(letter - 1);
    }
    return idx;
}

Word word_at(std::size_t index, int dim, int level) {
    Word w;
    w.letters.assign(level, 1);
    for (int pos = level - 1; pos >= 0; --pos) {
        w.letters[pos] = static_cast<int>(index % dim) + 1;
        index /= static_cast<std::size_t>(dim);
    }
    return w;
}

void MultiPath::validate() const {
    if (dim < 1) throw std::invalid_argument("MultiPath: dim must be >= 1");
    if (times.size() < 2) throw std::invalid_argument("MultiPath: need at least two points");
    if (values.size() != times.size() * static_cast<std::size_t>(dim))
        throw std::invalid_argument("MultiPath: values size inconsistent with times/dim");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("MultiPath: times must be strictly increasing");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("MultiPath: non-finite value");
}

MultiPath zip_paths(const std::vector<const MultiPath*>& components) {
    if (components.empty()) throw std::invalid_argument("zip_paths: no components");
    const MultiPath& first = *components.front();
    MultiPath out;
    out.dim = 0;
    for (const MultiPath* c : components) {
        if (c->times != first.times)
            throw std::invalid_argument("zip_paths: components on different grids");
        out.dim += c->dim;
    }
    out.times = first.times;
    out.values.resize(out.times.size() * static_cast<std::size_t>(out.dim));
    for (std::size_t i = 0; i < out.times.size(); ++i) {
        int k = 0;
        for (const MultiPath* c : components)
            for (int j = 0; j < c->dim; ++j) out.value(i, k++) = c->value(i, j);
    }
    return out;
}

MultiPath linear_image(const MultiPath& path, const std::vector<double>& L, int out_dim) {
    if (L.size() != static_cast<std::size_t>(out_dim) * path.dim)
        throw std::invalid_argument("linear_image: matrix shape mismatch");
    MultiPath out;
    out.dim = out_dim;
    out.times = path.times;
    out.values.assign(path.points() * static_cast<std::size_t>(out_dim), 0.0);
    for (std::size_t i = 0; i < path.points(); ++i)
        for (int a = 0; a < out_dim; ++a) {
            double acc = 0.0;
            for (int b = 0; b < path.dim; ++b) acc += L[a * path.dim + b] * path.value(i, b);
            out.value(i, a) = acc;
        }
    return out;
}

MultiPath reversed(const MultiPath& path) {
    MultiPath out;
    out.dim = path.dim;
    out.times = path.times;
    out.values.resize(path.values.size());
    std::size_t n = path.points();
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < path.dim; ++k) out.value(i, k) = path.value(n - 1 - i, k);
    return out;
}

TruncatedSignature TruncatedSignature::identity(int dim, int depth) {
    check_dims(dim, depth);
    TruncatedSignature s;
    s.dim = dim;
    s.depth = depth;
    s.levels.resize(depth + 1);
    s.levels[0] = {1.0};
    for (int k = 1; k <= depth; ++k) s.levels[k].assign(level_size(dim, k), 0.0);
    return s;
}

double TruncatedSignature::coeff(const Word& word) const {
    int k = word.length();
    if (k > depth) throw std::invalid_argument("coeff: word longer than depth");
    return levels[k][word_index(word, dim)];
}

void TruncatedSignature::validate() const {
    check_dims(dim, depth);
    if (levels.size() != static_cast<std::size_t>(depth) + 1)
        throw std::invalid_argument("TruncatedSignature: level count mismatch");
    if (levels[0].size() != 1 || levels[0][0] != 1.0)
        throw std::invalid_argument("TruncatedSignature: level-0 coefficient must be 1");
    for (int k = 0; k <= depth; ++k) {
        if (levels[k].size() != level_size(dim, k))
            throw std::invalid_argument("TruncatedSignature: level size mismatch");
        for (double v : levels[k])
            if (!std::isfinite(v))
                throw std::invalid_argument("TruncatedSignature: non-finite coefficient");
    }
}

TruncatedSignature segment_exp(std::span<const double> increment, int depth) {
    int dim = static_cast<int>(increment.size());
    TruncatedSignature s = TruncatedSignature::identity(dim, depth);
    for (int k = 1; k <= depth; ++k) {
        const auto& prev = s.levels[k - 1];
        auto& cur = s.levels[k];
        double inv = 1.0 / k;
        std::size_t i = 0;
        for (double p : prev)
            for (double v : increment) cur[i++] = p * v * inv;
    }
    return s;
}

void chen_mul_inplace(TruncatedSignature& a, const TruncatedSignature& b) {
    if (a.dim != b.dim || a.depth != b.depth)
        throw std::invalid_argument("chen_mul: dim/depth mismatch");
    int m = a.depth;
    for (int level = m; level >= 1; --level) {
        auto& dest = a.levels[level];
        // cross terms a_j (x) b_{level-j}, 1 <= j < level
        for (int aj = level - 1; aj >= 1; --aj) {
            const auto& av = a.levels[aj];
            const auto& bv = b.levels[level - aj];
            std::size_t i = 0;
            for (double x : av)
                for (double y : bv) dest[i++] += x * y;
        }
        // a_0 (x) b_level with a_0 = 1
        const auto& btop = b.levels[level];
        for (std::size_t i = 0; i < dest.size(); ++i) dest[i] += btop[i];
    }
}

TruncatedSignature chen_mul(const TruncatedSignature& a, const TruncatedSignature& b) {
    TruncatedSignature out = a;
    chen_mul_inplace(out, b);
    return out;
}

TruncatedSignature signature(const MultiPath& path, int depth) {
    path.validate();
    check_dims(path.dim, depth);
    TruncatedSignature acc = TruncatedSignature::identity(path.dim, depth);
    std::vector<double> inc(path.dim);
    for (std::size_t i = 0; i + 1 < path.points(); ++i) {
        for (int k = 0; k < path.dim; ++k) inc[k] = path.value(i + 1, k) - path.value(i, k);
        chen_mul_inplace(acc, segment_exp(inc, depth));
    }
    return acc;
}

TruncatedSignature apply_linear_map(const TruncatedSignature& sig,
                                    const std::vector<double>& L, int out_dim) {
    int m = sig.dim;
    if (L.size() != static_cast<std::size_t>(out_dim) * m)
        throw std::invalid_argument("apply_linear_map: matrix shape mismatch");
    check_dims(out_dim, sig.depth);
    TruncatedSignature out = TruncatedSignature::identity(out_dim, sig.depth);
    for (int level = 1; level <= sig.depth; ++level) {
        // contract one tensor slot at a time, rightmost first: after processing
        // slot s the array has shape (m^s, out_dim^{level-s})
        std::vector<double> cur = sig.levels[level];
        std::vector<double> next;
        for (int slot = level - 1; slot >= 0; --slot) {
            std::size_t pre = level_size(m, slot);
            std::size_t suf = level_size(out_dim, level - 1 - slot);
            next.assign(pre * static_cast<std::size_t>(out_dim) * suf, 0.0);
            for (std::size_t p = 0; p < pre; ++p)
                for (int i = 0; i < out_dim; ++i) {
                    double* dst = &next[(p * out_dim + i) * suf];
                    for (int j = 0; j < m; ++j) {
                        double w = L[i * m + j];
                        if (w == 0.0) continue;
                        const double* src = &cur[(p * m + j) * suf];
                        for (std::size_t q = 0; q < suf; ++q) dst[q] += w * src[q];
                    }
                }
            cur.swap(next);
        }
        out.levels[level] = std::move(cur);
    }
    return out;
}

}  // namespace sigpert
