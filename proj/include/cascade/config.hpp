#ifndef CASCADE_CONFIG_HPP
#define CASCADE_CONFIG_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cascade/cascade_engine.hpp"
#include "cascade/expert_oracle.hpp"

namespace cascade {

enum class ExpertKind { Dataset, Noisy, Remote };

struct ExpertSettings {
    ExpertKind kind = ExpertKind::Dataset;
    double flip_prob = 0.0;
    std::uint64_t seed = 17;
    RemoteExpertConfig remote;
};

/// Everything a `run` needs. engine.labels stays empty when the file has no
/// `labels` key; callers then fill it from the stream.
struct RunConfig {
    EngineConfig engine;
    ExpertSettings expert;
    bool labels_from_file = false;
};

/// Flat `key = value` text, `#` starts a comment. Per-level keys take a
/// comma-separated list with one entry per non-expert level, or a single
/// value applied to every level. Unknown keys are rejected.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Builds the configured expert. CASCADE_EXPERT_URL overrides the remote endpoint.
std::shared_ptr<Expert> make_expert(const ExpertSettings& settings, const LabelSet& labels);

std::string to_string(ExpertKind kind);

/// Run summary as a JSON document: totals, per-level usage, beta schedule,
/// cost model and the settings needed to reproduce the run.
std::string summary_json(const RunSummary& summary, const EngineConfig& config);

} // namespace cascade

#endif // CASCADE_CONFIG_HPP
