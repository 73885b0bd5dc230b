#ifndef CASCADE_SYNTHETIC_HPP
#define CASCADE_SYNTHETIC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cascade/core_types.hpp"

namespace cascade {

// Two-class text stream for experiments without an external corpus.
//
// Words live on an axis w0..w{V-1}. Each content token of a class-y record is
// drawn from a Gaussian centred at V/4 (class "negative") or 3V/4 (class
// "positive"); the rest are neutral filler words. Records carry a genre
// category, and "comedy" records have their centres nudged toward the middle,
// which makes that slice slightly harder.
struct SyntheticConfig {
    std::size_t records = 1000;
    std::size_t vocabulary = 200;
    double spread = 0.1;       // sigma as a fraction of the vocabulary
    double filler_prob = 0.3;
    std::size_t min_tokens = 8;
    std::size_t max_tokens = 60;
    double comedy_shift = 0.05; // fraction of the vocabulary
    std::uint64_t seed = 1;

    void validate() const;
};

inline const std::vector<std::string>& synthetic_labels()
{
    static const std::vector<std::string> labels = {"negative", "positive"};
    return labels;
}

std::vector<StreamRecord> generate_synthetic(const SyntheticConfig& config);

} // namespace cascade

#endif // CASCADE_SYNTHETIC_HPP
