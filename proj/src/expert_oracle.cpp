#include "cascade/expert_oracle.hpp"

namespace cascade {

ExpertAnswer Expert::consult(const StreamRecord& record)
{
    const std::size_t label = answer(record);
    calls_.fetch_add(1);
    return {label, ProbabilityVector::one_hot(labels_.size(), label)};
}

std::size_t DatasetOracle::answer(const StreamRecord& record)
{
    if (!record.label) throw ConfigError("dataset oracle needs a label on record '" + record.id + "'");
    return labels_.index_of(*record.label);
}

NoisyOracle::NoisyOracle(LabelSet labels, double flip_prob, std::uint64_t seed)
    : Expert(std::move(labels)), flip_prob_(flip_prob), rng_(seed)
{
    if (!(flip_prob >= 0.0 && flip_prob < 1.0)) throw ConfigError("expert.flip_prob must be in [0,1)");
}

std::size_t NoisyOracle::answer(const StreamRecord& record)
{
    if (!record.label) throw ConfigError("noisy oracle needs a label on record '" + record.id + "'");
    const std::size_t truth = labels_.index_of(*record.label);
    std::lock_guard lock(mutex_);
    if (!bernoulli(rng_, flip_prob_)) return truth;
    flips_.fetch_add(1);
    const auto other = static_cast<std::size_t>(uniform_index(rng_, labels_.size() - 1));
    return other < truth ? other : other + 1;
}

std::pair<std::string, std::string> split_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("expert url needs a scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace cascade
