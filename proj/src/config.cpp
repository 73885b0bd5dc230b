#include "cascade/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include <json.hpp>

namespace cascade {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

double to_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v)
{
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': '" + v + "' is not a nonnegative integer");
    return out;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

ExpertKind parse_expert_kind(const std::string& v)
{
    if (v == "dataset") return ExpertKind::Dataset;
    if (v == "noisy") return ExpertKind::Noisy;
    if (v == "remote") return ExpertKind::Remote;
    throw ConfigError("unknown expert.kind '" + v + "'");
}

} // namespace

std::string to_string(ExpertKind kind)
{
    switch (kind) {
    case ExpertKind::Dataset: return "dataset";
    case ExpertKind::Noisy: return "noisy";
    case ExpertKind::Remote: return "remote";
    }
    return "dataset";
}

RunConfig parse_config(std::istream& in)
{
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, trim(line.substr(eq + 1))).second)
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }

    RunConfig cfg;
    EngineConfig& e = cfg.engine;

    // Level kinds fix N, so read them first.
    std::vector<std::string> kinds = {"softmax", "mlp"};
    if (auto it = kv.find("levels"); it != kv.end()) {
        kinds = split_list(it->second);
        kv.erase(it);
    }
    e.levels.clear();
    for (const auto& k : kinds) {
        LevelSpec spec;
        spec.kind = parse_level_kind(k);
        e.levels.push_back(spec);
    }
    const std::size_t n_inner = e.levels.size();
    e.cost.defer_penalties.assign(n_inner, 1.0);

    const auto per_level = [&](const std::string& key, const std::string& value,
                               const std::function<void(LevelSpec&, const std::string&)>& set) {
        const auto items = split_list(value);
        if (items.size() != 1 && items.size() != n_inner)
            throw ConfigError("config key '" + key + "' needs 1 or " + std::to_string(n_inner) + " values");
        for (std::size_t i = 0; i < n_inner; ++i) set(e.levels[i], items.size() == 1 ? items[0] : items[i]);
    };

    for (const auto& [key, value] : kv) {
        if (key == "labels") {
            e.labels = LabelSet(split_list(value));
            cfg.labels_from_file = true;
        } else if (key == "seed") {
            e.seed = to_uint(key, value);
        } else if (key == "mode") {
            e.mode = parse_engine_mode(value);
        } else if (key == "beta.initial") {
            e.beta_initial = to_double(key, value);
        } else if (key == "beta.decay") {
            e.beta_decay = to_double(key, value);
        } else if (key == "cost.mu") {
            e.cost.mu = to_double(key, value);
        } else if (key == "cost.defer_penalties") {
            e.cost.defer_penalties.clear();
            for (const auto& v : split_list(value)) e.cost.defer_penalties.push_back(to_double(key, v));
        } else if (key == "cost.loss") {
            e.cost.loss_kind = parse_loss_kind(value);
        } else if (key == "featurizer.dim") {
            e.featurizer.dim = to_uint(key, value);
        } else if (key == "featurizer.lowercase") {
            e.featurizer.lowercase = to_bool(key, value);
        } else if (key == "featurizer.ngram_max") {
            e.featurizer.ngram_max = static_cast<int>(to_uint(key, value));
        } else if (key == "featurizer.seed") {
            e.featurizer.seed = to_uint(key, value);
        } else if (key == "level.learning_rate") {
            per_level(key, value, [&](LevelSpec& s, const std::string& v) { s.learning_rate = to_double(key, v); });
        } else if (key == "level.hidden") {
            per_level(key, value, [&](LevelSpec& s, const std::string& v) { s.hidden = to_uint(key, v); });
        } else if (key == "level.cache_size") {
            per_level(key, value, [&](LevelSpec& s, const std::string& v) { s.cache_size = to_uint(key, v); });
        } else if (key == "level.batch_size") {
            per_level(key, value, [&](LevelSpec& s, const std::string& v) { s.batch_size = to_uint(key, v); });
        } else if (key == "calibrator.learning_rate") {
            per_level(key, value,
                      [&](LevelSpec& s, const std::string& v) { s.calibrator_learning_rate = to_double(key, v); });
        } else if (key == "calibrator.cache_size") {
            per_level(key, value,
                      [&](LevelSpec& s, const std::string& v) { s.calibrator_cache_size = to_uint(key, v); });
        } else if (key == "calibrator.batch_size") {
            per_level(key, value,
                      [&](LevelSpec& s, const std::string& v) { s.calibrator_batch_size = to_uint(key, v); });
        } else if (key == "calibrator.calibration_factor") {
            per_level(key, value,
                      [&](LevelSpec& s, const std::string& v) { s.calibration_factor = to_double(key, v); });
        } else if (key == "expert.kind") {
            cfg.expert.kind = parse_expert_kind(value);
        } else if (key == "expert.flip_prob") {
            cfg.expert.flip_prob = to_double(key, value);
        } else if (key == "expert.seed") {
            cfg.expert.seed = to_uint(key, value);
        } else if (key == "expert.url") {
            cfg.expert.remote.url = value;
        } else if (key == "expert.timeout_ms") {
            cfg.expert.remote.timeout = std::chrono::milliseconds(to_uint(key, value));
        } else if (key == "expert.template") {
            cfg.expert.remote.prompt_template = value;
        } else if (key == "expert.retries") {
            cfg.expert.remote.retries = static_cast<int>(to_uint(key, value));
        } else if (key == "expert.max_concurrency") {
            cfg.expert.remote.max_concurrency = static_cast<int>(to_uint(key, value));
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    return parse_config(in);
}

std::shared_ptr<Expert> make_expert(const ExpertSettings& settings, const LabelSet& labels)
{
    switch (settings.kind) {
    case ExpertKind::Dataset:
        return std::make_shared<DatasetOracle>(labels);
    case ExpertKind::Noisy:
        return std::make_shared<NoisyOracle>(labels, settings.flip_prob, settings.seed);
    case ExpertKind::Remote: {
        RemoteExpertConfig remote = settings.remote;
        if (const char* url = std::getenv("CASCADE_EXPERT_URL"); url != nullptr && *url != '\0') remote.url = url;
        return std::make_shared<RemoteExpertClient>(labels, remote);
    }
    }
    throw ConfigError("unknown expert kind");
}

std::string summary_json(const RunSummary& summary, const EngineConfig& config)
{
    nlohmann::ordered_json doc;
    doc["T"] = summary.episodes;
    doc["labelled"] = summary.labelled;
    if (summary.accuracy)
        doc["accuracy"] = *summary.accuracy;
    else
        doc["accuracy"] = nullptr;
    doc["expert_calls"] = summary.expert_calls;
    doc["beta_jumps"] = summary.beta_jumps;
    doc["level_counts"] = summary.level_counts;
    doc["level_fractions"] = summary.level_fractions;
    doc["total_J"] = summary.total_J;
    doc["beta"] = {{"initial", config.beta_initial}, {"decay", config.beta_decay}, {"final", summary.final_beta}};
    doc["cost"] = {{"mu", config.cost.mu},
                   {"defer_penalties", config.cost.defer_penalties},
                   {"loss", to_string(config.cost.loss_kind)}};
    std::vector<std::string> kinds;
    for (const auto& l : config.levels) kinds.push_back(to_string(l.kind));
    doc["levels"] = kinds;
    doc["seed"] = config.seed;
    doc["mode"] = to_string(config.mode);
    doc["labels"] = config.labels.names();
    return doc.dump(2) + "\n";
}

} // namespace cascade
