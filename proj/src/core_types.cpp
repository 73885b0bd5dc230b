#include "cascade/core_types.hpp"

#include <algorithm>
#include <cmath>

namespace cascade {

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels))
{
    if (labels_.size() < 2) throw ConfigError("label set needs at least 2 labels");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (!lookup_.emplace(labels_[i], i).second)
            throw ConfigError("duplicate label '" + labels_[i] + "'");
    }
}

const std::string& LabelSet::name(std::size_t index) const
{
    require(index < labels_.size(), "label index out of range");
    return labels_[index];
}

std::size_t LabelSet::index_of(const std::string& label) const
{
    auto it = lookup_.find(label);
    if (it == lookup_.end()) throw ContractViolation("unknown label '" + label + "'");
    return it->second;
}

std::size_t utf8_length(const std::string& text)
{
    return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
}

StreamRecord make_record(std::string id, std::string text, std::optional<std::string> label,
                         std::optional<std::string> category)
{
    StreamRecord r;
    r.id = std::move(id);
    r.text = std::move(text);
    r.label = std::move(label);
    r.category = std::move(category);
    r.length_chars = utf8_length(r.text);
    return r;
}

ProbabilityVector::ProbabilityVector(Vector probs) : probs_(std::move(probs))
{
    require(probs_.size() >= 1, "probability vector is empty");
    for (Eigen::Index i = 0; i < probs_.size(); ++i) {
        const double p = probs_(i);
        if (!(p >= 0.0 && p <= 1.0)) throw ContractViolation("probability entry outside [0,1]");
    }
    if (std::abs(probs_.sum() - 1.0) > kNormalizationTolerance)
        throw ContractViolation("probability vector does not sum to 1");
}

ProbabilityVector ProbabilityVector::uniform(std::size_t n)
{
    return ProbabilityVector(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
}

ProbabilityVector ProbabilityVector::one_hot(std::size_t n, std::size_t index)
{
    require(index < n, "one_hot index out of range");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
    v(static_cast<Eigen::Index>(index)) = 1.0;
    return ProbabilityVector(std::move(v));
}

std::size_t ProbabilityVector::argmax() const
{
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < probs_.size(); ++i)
        if (probs_(i) > probs_(best)) best = i;
    return static_cast<std::size_t>(best);
}

LossKind parse_loss_kind(const std::string& name)
{
    if (name == "zero_one") return LossKind::ZeroOne;
    if (name == "cross_entropy") return LossKind::CrossEntropy;
    throw ConfigError("unknown loss kind '" + name + "'");
}

std::string to_string(LossKind kind)
{
    return kind == LossKind::ZeroOne ? "zero_one" : "cross_entropy";
}

double CostModel::deferral_charge(std::size_t level_i) const
{
    if (level_i < 1 || level_i >= levels())
        throw ContractViolation("level " + std::to_string(level_i) + " has no defer branch");
    return mu * defer_penalties[level_i - 1];
}

void CostModel::validate() const
{
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("cost.mu must be a finite nonnegative number");
    if (defer_penalties.empty()) throw ConfigError("cost model needs at least one deferral penalty");
    for (double c : defer_penalties)
        if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("deferral penalties must be positive");
}

double prediction_loss(std::size_t predicted, std::size_t truth, std::size_t num_labels, LossKind kind)
{
    require(truth < num_labels && predicted < num_labels, "label index out of range");
    if (kind == LossKind::ZeroOne) return predicted == truth ? 0.0 : 1.0;
    return predicted == truth ? 0.0 : -std::log(kProbabilityFloor);
}

double prediction_loss(const ProbabilityVector& pred, std::size_t truth, LossKind kind)
{
    require(truth < pred.size(), "truth index out of range");
    if (kind == LossKind::ZeroOne) return pred.argmax() == truth ? 0.0 : 1.0;
    return -std::log(std::max(pred[truth], kProbabilityFloor));
}

double expected_prediction_loss(const ProbabilityVector& pred, std::size_t truth, LossKind kind)
{
    require(truth < pred.size(), "truth index out of range");
    if (kind == LossKind::ZeroOne) return 1.0 - pred[truth];
    return -std::log(std::max(pred[truth], kProbabilityFloor));
}

double immediate_cost(double defer_prob, const ProbabilityVector& pred, std::size_t truth,
                      std::size_t level_i, const CostModel& cost)
{
    require(defer_prob >= 0.0 && defer_prob <= 1.0, "defer probability outside [0,1]");
    const double charge = cost.deferral_charge(level_i);
    return defer_prob * charge + (1.0 - defer_prob) * expected_prediction_loss(pred, truth, cost.loss_kind);
}

double reach_probability(std::span<const double> defer_probs_prefix)
{
    double p = 1.0;
    for (double d : defer_probs_prefix) {
        require(d >= 0.0 && d <= 1.0, "defer probability outside [0,1]");
        p *= d;
    }
    return p;
}

double episode_cost(const EpisodeCostInputs& episode, const CostModel& cost)
{
    const std::size_t inner = cost.levels() - 1;
    require(episode.defer_probs.size() == inner && episode.level_preds.size() == inner,
            "episode needs one defer probability and prediction per non-expert level");
    double reach = 1.0;
    double total = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
        total += reach * immediate_cost(episode.defer_probs[i], episode.level_preds[i], episode.truth, i + 1, cost);
        reach *= episode.defer_probs[i];
    }
    if (episode.expert_pred)
        total += reach * expected_prediction_loss(*episode.expert_pred, episode.truth, cost.loss_kind);
    return total;
}

double total_cost(std::span<const EpisodeCostInputs> episodes, const CostModel& cost)
{
    double total = 0.0;
    for (const auto& e : episodes) total += episode_cost(e, cost);
    return total;
}

} // namespace cascade
