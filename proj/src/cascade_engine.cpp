#include "cascade/cascade_engine.hpp"

#include <cmath>

namespace cascade {

LevelKind parse_level_kind(const std::string& name)
{
    if (name == "softmax" || name == "softmax_regression" || name == "lr") return LevelKind::SoftmaxRegression;
    if (name == "mlp") return LevelKind::Mlp;
    throw ConfigError("unknown level model kind '" + name + "'");
}

std::string to_string(LevelKind kind)
{
    return kind == LevelKind::SoftmaxRegression ? "softmax" : "mlp";
}

EngineMode parse_engine_mode(const std::string& name)
{
    if (name == "learning") return EngineMode::Learning;
    if (name == "inference") return EngineMode::Inference;
    throw ConfigError("unknown mode '" + name + "' (expected learning or inference)");
}

std::string to_string(EngineMode mode)
{
    return mode == EngineMode::Learning ? "learning" : "inference";
}

void EngineConfig::validate() const
{
    if (labels.size() < 2) throw ConfigError("engine needs a label set with at least 2 labels");
    if (levels.empty()) throw ConfigError("cascade needs at least one non-expert level (N >= 2)");
    featurizer.validate();
    cost.validate();
    if (cost.defer_penalties.size() != levels.size())
        throw ConfigError("cost.defer_penalties needs exactly N-1 = " + std::to_string(levels.size()) + " entries");
    if (!(beta_initial >= 0.0 && beta_initial <= 1.0)) throw ConfigError("beta.initial must be in [0,1]");
    if (!(beta_decay > 0.0 && beta_decay <= 1.0)) throw ConfigError("beta.decay must be in (0,1]");
    for (const auto& l : levels) {
        if (!(l.learning_rate > 0.0) || !(l.calibrator_learning_rate > 0.0))
            throw ConfigError("learning rates must be positive");
        if (l.batch_size < 1 || l.cache_size < l.batch_size)
            throw ConfigError("level cache_size must be >= batch_size >= 1");
        if (l.calibrator_batch_size < 1 || l.calibrator_cache_size < l.calibrator_batch_size)
            throw ConfigError("calibrator cache_size must be >= batch_size >= 1");
        if (l.kind == LevelKind::Mlp && l.hidden < 1) throw ConfigError("mlp hidden width must be >= 1");
    }
}

CascadeEngine::CascadeEngine(EngineConfig config, std::shared_ptr<Expert> expert)
    : config_(std::move(config)),
      featurizer_((config_.validate(), config_.featurizer)),
      expert_(std::move(expert)),
      rng_(config_.seed),
      beta_(config_.beta_initial),
      level_counts_(config_.num_levels(), 0)
{
    require(expert_ != nullptr, "engine needs an expert");
    if (expert_->labels().names() != config_.labels.names())
        throw ConfigError("expert label set differs from the engine label set");

    const std::size_t dim = config_.featurizer.dim;
    const std::size_t k = config_.labels.size();
    for (std::size_t i = 0; i < config_.levels.size(); ++i) {
        const auto& spec = config_.levels[i];
        const std::size_t level = i + 1;
        if (spec.kind == LevelKind::SoftmaxRegression)
            models_.push_back(std::make_unique<SoftmaxRegression>(dim, k, spec.learning_rate));
        else
            models_.push_back(
                std::make_unique<Mlp>(dim, k, spec.hidden, spec.learning_rate, splitmix64(config_.seed + level)));
        deferrals_.push_back(std::make_unique<CalibratorMlp>(level, k, spec.calibrator_learning_rate,
                                                             splitmix64(config_.seed + 1000 + level)));
        replay_.emplace_back(spec.cache_size, spec.batch_size);
        calibration_.emplace_back(spec.calibrator_cache_size, spec.calibrator_batch_size);
    }
}

std::size_t CascadeEngine::check_level(std::size_t level_i) const
{
    require(level_i >= 1 && level_i < num_levels(), "level index must be in [1, N-1]");
    return level_i - 1;
}

LevelModel& CascadeEngine::model(std::size_t level_i) { return *models_[check_level(level_i)]; }
const LevelModel& CascadeEngine::model(std::size_t level_i) const { return *models_[check_level(level_i)]; }
DeferralFunction& CascadeEngine::deferral(std::size_t level_i) { return *deferrals_[check_level(level_i)]; }
const DeferralFunction& CascadeEngine::deferral(std::size_t level_i) const
{
    return *deferrals_[check_level(level_i)];
}
const ReplayCache<LabeledExample>& CascadeEngine::replay(std::size_t level_i) const
{
    return replay_[check_level(level_i)];
}
const ReplayCache<CalibrationSample>& CascadeEngine::calibration_cache(std::size_t level_i) const
{
    return calibration_[check_level(level_i)];
}

void CascadeEngine::set_deferral(std::size_t level_i, std::unique_ptr<DeferralFunction> f)
{
    require(f != nullptr && f->level() == level_i, "deferral function must belong to the level it replaces");
    deferrals_[check_level(level_i)] = std::move(f);
}

std::optional<std::size_t> CascadeEngine::truth_of(const StreamRecord& record) const
{
    if (!record.label) return std::nullopt;
    return config_.labels.index_of(*record.label);
}

EpisodeResult CascadeEngine::process_query(const StreamRecord& record)
{
    return process_query(record, rng_);
}

EpisodeResult CascadeEngine::process_query(const StreamRecord& record, Rng& rng)
{
    const bool learning = config_.mode == EngineMode::Learning;
    const std::size_t n = num_levels();
    const std::uint64_t t = t_ + 1;
    const HashedFeatureVector features = featurizer_(record.text);
    const std::optional<std::size_t> record_truth = truth_of(record);

    EpisodeTrace trace;
    trace.episode_t = t;
    std::vector<std::optional<ProbabilityVector>> preds(n - 1);
    std::vector<double> defer_probs(n - 1, 0.0);
    std::optional<std::size_t> predicted;

    for (std::size_t i = 1; i < n; ++i) {
        if (learning && bernoulli(rng, beta_)) {
            trace.jumped_to_expert = true;
            break;
        }
        ProbabilityVector pred = models_[i - 1]->predict(features);
        const double dp = deferrals_[i - 1]->defer_probability(pred);
        trace.levels_visited.push_back(i);
        trace.per_level_defer_probs.push_back(dp);
        defer_probs[i - 1] = dp;
        const Action action = learning ? sample_from_probability(dp, pred, rng) : decide_from_probability(dp, pred);
        preds[i - 1] = std::move(pred);
        if (!action.is_defer()) {
            predicted = action.label_index;
            trace.final_level = i;
            break;
        }
    }

    if (!predicted) {
        // Throws before any state below is touched.
        const ExpertAnswer answer = expert_->consult(record);
        predicted = answer.label;
        trace.expert_label = answer.label;
        trace.final_level = n;
        trace.levels_visited.push_back(n);
    }
    trace.prediction = *predicted;

    const std::optional<std::size_t> truth = record_truth ? record_truth : trace.expert_label;

    // Expected episode cost of the policy in force before this episode's updates.
    double episode_J = 0.0;
    if (truth) {
        EpisodeCostInputs inputs;
        inputs.truth = *truth;
        for (std::size_t i = 1; i < n; ++i) {
            if (!preds[i - 1]) {
                ProbabilityVector p = models_[i - 1]->predict(features);
                defer_probs[i - 1] = deferrals_[i - 1]->defer_probability(p);
                inputs.level_preds.push_back(std::move(p));
            } else {
                inputs.level_preds.push_back(*preds[i - 1]);
            }
            inputs.defer_probs.push_back(defer_probs[i - 1]);
        }
        episode_J = episode_cost(inputs, config_.cost);
        for (std::size_t level : trace.levels_visited) {
            if (level < n)
                trace.immediate_costs.push_back(
                    immediate_cost(defer_probs[level - 1], *preds[level - 1], *truth, level, config_.cost));
            else
                trace.immediate_costs.push_back(0.0); // perfect-expert reading
        }
    }

    // Commit.
    t_ = t;
    if (trace.jumped_to_expert) ++beta_jumps_;
    if (trace.expert_label) ++expert_calls_;
    ++level_counts_[trace.final_level - 1];
    running_J_ += episode_J;
    std::optional<bool> correct;
    if (record_truth) {
        correct = (*record_truth == trace.prediction);
        ++labelled_;
        if (*correct) ++correct_;
    }

    if (learning) {
        if (trace.expert_label) {
            const std::size_t label = *trace.expert_label;
            for (std::size_t i = 1; i < n; ++i) {
                replay_[i - 1].push({features, label});
                if (preds[i - 1])
                    calibration_[i - 1].push(make_calibration_sample(i, *preds[i - 1], label));
            }
        }
        train_levels(rng);
        decay_beta();
    }

    EpisodeResult result;
    result.prediction = trace.prediction;
    result.metrics.t = t;
    result.metrics.level_used = trace.final_level;
    result.metrics.prediction = trace.prediction;
    result.metrics.correct = correct;
    result.metrics.expert_called = trace.expert_label.has_value();
    result.metrics.cum_expert_calls = expert_calls_;
    result.metrics.cum_level_counts = level_counts_;
    if (labelled_ > 0)
        result.metrics.running_accuracy = static_cast<double>(correct_) / static_cast<double>(labelled_);
    result.metrics.running_J = running_J_;
    result.trace = std::move(trace);
    return result;
}

void CascadeEngine::train_levels(Rng& rng)
{
    for (std::size_t i = 0; i < models_.size(); ++i) {
        if (replay_[i].ready()) {
            const auto batch = replay_[i].sample(rng);
            models_[i]->update(batch);
            replay_[i].consume();
        }
        if (calibration_[i].ready()) {
            if (deferrals_[i]->trainable()) {
                const auto batch = calibration_[i].sample(rng);
                deferrals_[i]->calibrate(batch);
            }
            calibration_[i].consume();
        }
    }
}

RunSummary CascadeEngine::run_stream(std::span<const StreamRecord> records, MetricsSink* sink)
{
    try {
        for (const auto& record : records) {
            const EpisodeResult r = process_query(record);
            if (sink) sink->on_step(r.metrics, r.trace);
        }
    } catch (...) {
        if (sink) sink->flush();
        throw;
    }
    if (sink) sink->flush();
    return summary();
}

RunSummary CascadeEngine::summary() const
{
    RunSummary s;
    s.episodes = t_;
    s.labelled = labelled_;
    s.correct = correct_;
    if (labelled_ > 0) s.accuracy = static_cast<double>(correct_) / static_cast<double>(labelled_);
    s.expert_calls = expert_calls_;
    s.beta_jumps = beta_jumps_;
    s.level_counts = level_counts_;
    for (auto c : level_counts_)
        s.level_fractions.push_back(t_ > 0 ? static_cast<double>(c) / static_cast<double>(t_) : 0.0);
    s.total_J = running_J_;
    s.final_beta = beta_;
    return s;
}

EpisodeCostInputs CascadeEngine::policy_inputs(const StreamRecord& record) const
{
    const auto truth = truth_of(record);
    require(truth.has_value(), "policy cost evaluation needs a label on record '" + record.id + "'");
    const HashedFeatureVector features = featurizer_(record.text);
    EpisodeCostInputs inputs;
    inputs.truth = *truth;
    for (std::size_t i = 0; i < models_.size(); ++i) {
        ProbabilityVector p = models_[i]->predict(features);
        inputs.defer_probs.push_back(deferrals_[i]->defer_probability(p));
        inputs.level_preds.push_back(std::move(p));
    }
    return inputs;
}

std::vector<EpisodeCostInputs> CascadeEngine::policy_inputs(std::span<const StreamRecord> records) const
{
    std::vector<EpisodeCostInputs> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(policy_inputs(r));
    return out;
}

double CascadeEngine::evaluate_policy_cost(std::span<const StreamRecord> records) const
{
    const auto inputs = policy_inputs(records);
    return total_cost(inputs, config_.cost);
}

EngineSnapshot CascadeEngine::snapshot() const
{
    EngineSnapshot snap;
    for (const auto& m : models_) snap.models.push_back(m->snapshot());
    for (const auto& f : deferrals_) {
        if (const auto* c = dynamic_cast<const CalibratorMlp*>(f.get()))
            snap.calibrators.emplace_back(c->snapshot());
        else
            snap.calibrators.emplace_back(std::nullopt);
    }
    snap.beta = beta_;
    snap.episodes = t_;
    return snap;
}

void CascadeEngine::restore(const EngineSnapshot& snap)
{
    require(snap.models.size() == models_.size() && snap.calibrators.size() == deferrals_.size(),
            "snapshot level count mismatch");
    for (std::size_t i = 0; i < models_.size(); ++i) {
        models_[i]->restore(snap.models[i]);
        if (snap.calibrators[i]) {
            auto* c = dynamic_cast<CalibratorMlp*>(deferrals_[i].get());
            require(c != nullptr, "snapshot holds a calibrator for a scripted gate");
            c->restore(*snap.calibrators[i]);
        }
    }
    beta_ = snap.beta;
    t_ = snap.episodes;
}

} // namespace cascade
