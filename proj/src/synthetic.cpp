#include "cascade/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "cascade/errors.hpp"
#include "cascade/random.hpp"

namespace cascade {

namespace {

const std::vector<std::string> kFiller = {"the", "a", "movie", "film", "it", "was", "and", "of", "this", "plot"};
const std::vector<std::string> kCategories = {"drama", "comedy", "action"};

} // namespace

void SyntheticConfig::validate() const
{
    require(vocabulary >= 4, "synthetic vocabulary must be at least 4");
    require(spread > 0.0, "synthetic spread must be positive");
    require(filler_prob >= 0.0 && filler_prob < 1.0, "filler probability must lie in [0, 1)");
    require(min_tokens >= 1 && min_tokens <= max_tokens, "token range must satisfy 1 <= min <= max");
}

std::vector<StreamRecord> generate_synthetic(const SyntheticConfig& config)
{
    config.validate();
    Rng rng(config.seed);
    const double v = static_cast<double>(config.vocabulary);
    const double sigma = config.spread * v;

    std::vector<StreamRecord> out;
    out.reserve(config.records);
    for (std::size_t r = 0; r < config.records; ++r) {
        const std::size_t y = uniform_index(rng, 2);
        const std::string& category = kCategories[uniform_index(rng, kCategories.size())];
        double centre = y == 0 ? 0.25 * v : 0.75 * v;
        if (category == "comedy") centre += (y == 0 ? 1.0 : -1.0) * config.comedy_shift * v;

        const std::size_t n_tokens =
            config.min_tokens + uniform_index(rng, config.max_tokens - config.min_tokens + 1);
        std::string text;
        for (std::size_t k = 0; k < n_tokens; ++k) {
            if (k > 0) text.push_back(' ');
            if (bernoulli(rng, config.filler_prob)) {
                text += kFiller[uniform_index(rng, kFiller.size())];
                continue;
            }
            const double pos = std::round(normal(rng, centre, sigma));
            const auto word = static_cast<std::size_t>(std::clamp(pos, 0.0, v - 1.0));
            text += "w" + std::to_string(word);
        }
        out.push_back(make_record("s" + std::to_string(r), std::move(text), synthetic_labels()[y], category));
    }
    return out;
}

} // namespace cascade
