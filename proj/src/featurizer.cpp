#include "cascade/featurizer.hpp"

#include <bit>
#include <cmath>
#include <map>

#include "cascade/errors.hpp"
#include "cascade/random.hpp"

namespace cascade {

namespace {

constexpr char kGramJoiner = '\x1f';

// Decodes one code point starting at text[pos]; returns its byte length.
// Malformed sequences are consumed one byte at a time.
std::size_t decode_utf8(std::string_view text, std::size_t pos, char32_t& cp)
{
    const auto b0 = static_cast<unsigned char>(text[pos]);
    std::size_t len = 1;
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    }
    if ((b0 & 0xE0) == 0xC0) {
        cp = b0 & 0x1F;
        len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
        cp = b0 & 0x0F;
        len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
        cp = b0 & 0x07;
        len = 4;
    } else {
        cp = 0xFFFD;
        return 1;
    }
    if (pos + len > text.size()) {
        cp = 0xFFFD;
        return 1;
    }
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(text[pos + k]);
        if ((b & 0xC0) != 0x80) {
            cp = 0xFFFD;
            return 1;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    return len;
}

bool is_boundary(char32_t cp)
{
    if (cp < 0x80) {
        const char c = static_cast<char>(cp);
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') return true;
        return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) || (cp >= 0x5B && cp <= 0x60) ||
               (cp >= 0x7B && cp <= 0x7E) || cp < 0x20 || cp == 0x7F;
    }
    if (cp == 0x85 || cp == 0xA0 || cp == 0x1680) return true;
    if (cp >= 0xA1 && cp <= 0xBF && cp != 0xAA && cp != 0xB5 && cp != 0xBA) return true;
    if (cp >= 0x2000 && cp <= 0x206F) return true; // general punctuation + spaces
    if (cp >= 0x3000 && cp <= 0x303F) return true; // CJK symbols and punctuation
    if (cp >= 0xFE30 && cp <= 0xFE4F) return true;
    if (cp >= 0xFF01 && cp <= 0xFF0F) return true;
    return false;
}

} // namespace

void FeaturizerConfig::validate() const
{
    if (dim == 0 || !std::has_single_bit(dim)) throw ConfigError("featurizer.dim must be a power of two");
    if (ngram_max < 1) throw ConfigError("featurizer.ngram_max must be >= 1");
}

std::vector<std::string> tokenize(std::string_view text, bool lowercase)
{
    std::vector<std::string> tokens;
    std::string current;
    std::size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = 0;
        const std::size_t len = decode_utf8(text, pos, cp);
        if (is_boundary(cp)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else if (len == 1 && cp < 0x80) {
            char c = static_cast<char>(cp);
            if (lowercase && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            current.push_back(c);
        } else {
            current.append(text.substr(pos, len));
        }
        pos += len;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::uint64_t feature_hash(std::string_view token, std::uint64_t seed)
{
    std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
    for (char c : token) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

Featurizer::Featurizer(FeaturizerConfig config) : config_(config)
{
    config_.validate();
}

std::size_t Featurizer::bucket(std::string_view gram) const
{
    return static_cast<std::size_t>(feature_hash(gram, config_.seed) & (config_.dim - 1));
}

double Featurizer::sign(std::string_view gram) const
{
    return (std::popcount(feature_hash(gram, config_.seed)) & 1) ? -1.0 : 1.0;
}

HashedFeatureVector Featurizer::operator()(std::string_view text) const
{
    const auto tokens = tokenize(text, config_.lowercase);
    std::map<std::size_t, double> acc;
    std::string gram;
    for (std::size_t start = 0; start < tokens.size(); ++start) {
        gram.clear();
        for (int n = 0; n < config_.ngram_max && start + static_cast<std::size_t>(n) < tokens.size(); ++n) {
            if (n > 0) gram.push_back(kGramJoiner);
            gram += tokens[start + static_cast<std::size_t>(n)];
            const std::uint64_t h = feature_hash(gram, config_.seed);
            const double s = (std::popcount(h) & 1) ? -1.0 : 1.0;
            acc[static_cast<std::size_t>(h & (config_.dim - 1))] += s;
        }
    }

    HashedFeatureVector v(static_cast<Eigen::Index>(config_.dim));
    double norm2 = 0.0;
    for (const auto& [idx, w] : acc) norm2 += w * w;
    if (norm2 == 0.0) return v;
    const double inv = 1.0 / std::sqrt(norm2);
    v.reserve(static_cast<Eigen::Index>(acc.size()));
    for (const auto& [idx, w] : acc)
        if (w != 0.0) v.insertBack(static_cast<Eigen::Index>(idx)) = w * inv;
    return v;
}

} // namespace cascade
