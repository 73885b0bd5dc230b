#ifndef CASCADE_CASCADE_ENGINE_HPP
#define CASCADE_CASCADE_ENGINE_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cascade/core_types.hpp"
#include "cascade/deferral_policy.hpp"
#include "cascade/expert_oracle.hpp"
#include "cascade/featurizer.hpp"
#include "cascade/level_models.hpp"
#include "cascade/random.hpp"
#include "cascade/replay_buffer.hpp"

namespace cascade {

enum class LevelKind { SoftmaxRegression, Mlp };

LevelKind parse_level_kind(const std::string& name);
std::string to_string(LevelKind kind);

/// Hyperparameters for one non-expert level and its deferral function.
struct LevelSpec {
    LevelKind kind = LevelKind::SoftmaxRegression;
    double learning_rate = 1.0;
    std::size_t hidden = 256;
    std::size_t cache_size = 8;
    std::size_t batch_size = 8;
    double calibrator_learning_rate = 1.0;
    std::size_t calibrator_cache_size = 8;
    std::size_t calibrator_batch_size = 8;
    /// Accepted for config compatibility, not used by any update rule.
    double calibration_factor = 0.0;
};

enum class EngineMode { Learning, Inference };

EngineMode parse_engine_mode(const std::string& name);
std::string to_string(EngineMode mode);

struct EngineConfig {
    LabelSet labels;
    FeaturizerConfig featurizer;
    std::vector<LevelSpec> levels; // m_1..m_{N-1}
    CostModel cost;
    double beta_initial = 1.0;
    double beta_decay = 0.95;
    std::uint64_t seed = 0;
    EngineMode mode = EngineMode::Learning;

    std::size_t num_levels() const { return levels.size() + 1; }
    void validate() const;
};

struct StepMetrics {
    std::uint64_t t = 0;
    std::size_t level_used = 0;
    std::size_t prediction = 0;
    std::optional<bool> correct;
    bool expert_called = false;
    std::uint64_t cum_expert_calls = 0;
    std::vector<std::uint64_t> cum_level_counts; // index i-1 for level i
    std::optional<double> running_accuracy;
    double running_J = 0.0;
};

struct EpisodeResult {
    std::size_t prediction = 0;
    EpisodeTrace trace;
    StepMetrics metrics;
};

class MetricsSink {
public:
    virtual ~MetricsSink() = default;
    virtual void on_step(const StepMetrics& metrics, const EpisodeTrace& trace) = 0;
    virtual void flush() {}
};

struct RunSummary {
    std::uint64_t episodes = 0;
    std::uint64_t labelled = 0;
    std::uint64_t correct = 0;
    std::optional<double> accuracy;
    std::uint64_t expert_calls = 0;
    std::uint64_t beta_jumps = 0;
    std::vector<std::uint64_t> level_counts;
    std::vector<double> level_fractions;
    double total_J = 0.0;
    double final_beta = 0.0;
};

/// Frozen parameters of every trainable component plus the β state.
struct EngineSnapshot {
    std::vector<ParameterSnapshot> models;
    std::vector<std::optional<ParameterSnapshot>> calibrators;
    double beta = 0.0;
    std::uint64_t episodes = 0;
};

/// Online cascade: levels m_1..m_{N-1} with deferral functions, plus the expert m_N.
///
/// One instance processes one stream strictly in order. In learning mode every
/// level iteration first draws a β-jump straight to the expert; stochastic
/// deferral decides the rest. Expert answers feed per-level replay caches and
/// calibration caches, and each level takes at most one minibatch step per
/// episode. Inference mode freezes parameters, disables β-jumps and uses the
/// 0.5 threshold.
class CascadeEngine {
public:
    CascadeEngine(EngineConfig config, std::shared_ptr<Expert> expert);

    EpisodeResult process_query(const StreamRecord& record);
    EpisodeResult process_query(const StreamRecord& record, Rng& rng);

    RunSummary run_stream(std::span<const StreamRecord> records, MetricsSink* sink = nullptr);

    void decay_beta() { beta_ *= config_.beta_decay; }

    /// Eq.-1 inputs for one labelled record under the current (frozen) policy.
    EpisodeCostInputs policy_inputs(const StreamRecord& record) const;
    std::vector<EpisodeCostInputs> policy_inputs(std::span<const StreamRecord> records) const;

    /// Exact expected cost of the current policy on labelled records.
    double evaluate_policy_cost(std::span<const StreamRecord> records) const;

    void set_deferral(std::size_t level_i, std::unique_ptr<DeferralFunction> f);
    void set_mode(EngineMode mode) { config_.mode = mode; }

    LevelModel& model(std::size_t level_i);
    const LevelModel& model(std::size_t level_i) const;
    const DeferralFunction& deferral(std::size_t level_i) const;
    DeferralFunction& deferral(std::size_t level_i);
    const ReplayCache<LabeledExample>& replay(std::size_t level_i) const;
    const ReplayCache<CalibrationSample>& calibration_cache(std::size_t level_i) const;

    const EngineConfig& config() const { return config_; }
    const Featurizer& featurizer() const { return featurizer_; }
    const Expert& expert() const { return *expert_; }
    std::size_t num_levels() const { return config_.num_levels(); }
    double beta() const { return beta_; }
    std::uint64_t episodes() const { return t_; }
    std::uint64_t beta_jumps() const { return beta_jumps_; }
    std::uint64_t expert_calls() const { return expert_calls_; }
    double total_J() const { return running_J_; }

    EngineSnapshot snapshot() const;
    void restore(const EngineSnapshot& snap);

    RunSummary summary() const;

private:
    std::size_t check_level(std::size_t level_i) const;
    std::optional<std::size_t> truth_of(const StreamRecord& record) const;
    void train_levels(Rng& rng);

    EngineConfig config_;
    Featurizer featurizer_;
    std::shared_ptr<Expert> expert_;
    std::vector<std::unique_ptr<LevelModel>> models_;
    std::vector<std::unique_ptr<DeferralFunction>> deferrals_;
    std::vector<ReplayCache<LabeledExample>> replay_;
    std::vector<ReplayCache<CalibrationSample>> calibration_;
    Rng rng_;

    double beta_;
    std::uint64_t t_ = 0;
    std::uint64_t beta_jumps_ = 0;
    std::uint64_t expert_calls_ = 0;
    std::uint64_t labelled_ = 0;
    std::uint64_t correct_ = 0;
    std::vector<std::uint64_t> level_counts_;
    double running_J_ = 0.0;
};

} // namespace cascade

#endif // CASCADE_CASCADE_ENGINE_HPP
