#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sigpert {

// Hard ceiling on the truncation depth; dense level storage grows as dim^depth.
inline constexpr int kMaxDepth = 8;

std::size_t level_size(int dim, int level);
// Offset of the first level-`level` coordinate in the flat sequence
// (1, level-1 words, level-2 words, ...), contiguous row-major enumeration.
std::size_t level_offset(int dim, int level);
std::size_t total_size(int dim, int depth);

// Multi-index over the alphabet {1,...,dim}; empty word = level 0.
struct Word {
    std::vector<int> letters;

    int length() const { return static_cast<int>(letters.size()); }
};

// Row-major position of `word` within its level: the first letter is the most
// significant digit. Bijective on each level; throws on out-of-range letters.
std::size_t word_index(const Word& word, int dim);
Word word_at(std::size_t index, int dim, int level);

// Discretely sampled path on [0,1]: times strictly increasing with t0=0 and
// tN=1, values row-major (points x dim).
struct MultiPath {
    int dim = 0;
    std::vector<double> times;
    std::vector<double> values;

    std::size_t points() const { return times.size(); }
    double value(std::size_t i, int k) const { return values[i * dim + k]; }
    double& value(std::size_t i, int k) { return values[i * dim + k]; }
    void validate() const;
};

// Stack 1-dim paths sharing one grid into an m-dim path.
MultiPath zip_paths(const std::vector<const MultiPath*>& components);
// Pointwise image under the out_dim x dim matrix L (row-major).
MultiPath linear_image(const MultiPath& path, const std::vector<double>& L, int out_dim);
MultiPath reversed(const MultiPath& path);

// Graded tensor coefficients of levels 0..depth; levels[k] holds the dim^k
// level-k coordinates in row-major word order, levels[0] = {1}.
struct TruncatedSignature {
    int dim = 0;
    int depth = 0;
    std::vector<std::vector<double>> levels;

    static TruncatedSignature identity(int dim, int depth);
    double coeff(const Word& word) const;
    void validate() const;
};

// Truncated tensor exponential of a single linear segment: the level-k
// coefficient of (i1,...,ik) is prod_j v_{i_j} / k!.
TruncatedSignature segment_exp(std::span<const double> increment, int depth);

// Concatenation (Chen) product in the truncated tensor algebra.
TruncatedSignature chen_mul(const TruncatedSignature& a, const TruncatedSignature& b);
void chen_mul_inplace(TruncatedSignature& a, const TruncatedSignature& b);

// Signature of the piecewise-linear path: ordered Chen product of the
// segment exponentials over consecutive increments.
TruncatedSignature signature(const MultiPath& path, int depth);

// Level-wise action of L^{(x)k} for the out_dim x dim matrix L (row-major):
// commutes with `signature` applied to the pointwise image of the path.
TruncatedSignature apply_linear_map(const TruncatedSignature& sig,
                                    const std::vector<double>& L, int out_dim);

}  // namespace sigpert
