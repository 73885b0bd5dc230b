#ifndef CASCADE_FEATURIZER_HPP
#define CASCADE_FEATURIZER_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/SparseCore>

namespace cascade {

/// Sparse feature vector; dim is size(), nonzeros are sorted by index.
using HashedFeatureVector = Eigen::SparseVector<double>;

struct FeaturizerConfig {
    std::size_t dim = std::size_t{1} << 15;
    bool lowercase = true;
    int ngram_max = 2;
    std::uint64_t seed = 0x5eedf00dULL;

    void validate() const;
};

/// Splits on whitespace and punctuation (ASCII plus the common Unicode
/// space/punctuation blocks). Bytes of other multi-byte code points are kept.
std::vector<std::string> tokenize(std::string_view text, bool lowercase);

/// Seeded 64-bit hash of a byte string (FNV-1a core with a splitmix finalizer).
std::uint64_t feature_hash(std::string_view token, std::uint64_t seed);

/// Signed hashing trick over 1..ngram_max grams, L2 normalized.
/// Empty text yields the zero vector.
class Featurizer {
public:
    explicit Featurizer(FeaturizerConfig config = {});

    HashedFeatureVector operator()(std::string_view text) const;
    const FeaturizerConfig& config() const { return config_; }

    /// Bucket and sign a single n-gram would land on.
    std::size_t bucket(std::string_view gram) const;
    double sign(std::string_view gram) const;

private:
    FeaturizerConfig config_;
};

inline HashedFeatureVector featurize(std::string_view text, const FeaturizerConfig& config)
{
    return Featurizer(config)(text);
}

} // namespace cascade

#endif // CASCADE_FEATURIZER_HPP
