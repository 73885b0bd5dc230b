#ifndef CASCADE_CORE_TYPES_HPP
#define CASCADE_CORE_TYPES_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "cascade/errors.hpp"

namespace cascade {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Probability floor applied before any logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

/// Tolerance on the sum of a probability vector.
inline constexpr double kNormalizationTolerance = 1e-6;

class LabelSet {
public:
    LabelSet() = default;
    explicit LabelSet(std::vector<std::string> labels);

    std::size_t size() const { return labels_.size(); }
    const std::string& name(std::size_t index) const;
    std::size_t index_of(const std::string& label) const;
    bool contains(const std::string& label) const { return lookup_.count(label) != 0; }
    const std::vector<std::string>& names() const { return labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

struct StreamRecord {
    std::string id;
    std::string text;
    std::optional<std::string> label;
    std::optional<std::string> category;
    std::size_t length_chars = 0;
};

/// Builds a record and derives length_chars (UTF-8 code points).
StreamRecord make_record(std::string id, std::string text,
                         std::optional<std::string> label = std::nullopt,
                         std::optional<std::string> category = std::nullopt);

std::size_t utf8_length(const std::string& text);

/// A per-class distribution. Construction checks the invariants.
class ProbabilityVector {
public:
    ProbabilityVector() = default;
    explicit ProbabilityVector(Vector probs);

    static ProbabilityVector uniform(std::size_t n);
    static ProbabilityVector one_hot(std::size_t n, std::size_t index);

    std::size_t size() const { return static_cast<std::size_t>(probs_.size()); }
    double operator[](std::size_t i) const { return probs_(static_cast<Eigen::Index>(i)); }
    const Vector& values() const { return probs_; }

    /// Lowest index wins ties.
    std::size_t argmax() const;

private:
    Vector probs_;
};

struct CascadeStateId {
    std::uint64_t episode_t = 1;
    std::size_t level_i = 1;
    bool terminal = false;

    static CascadeStateId initial(std::uint64_t t) { return {t, 1, false}; }
    static CascadeStateId exit(std::uint64_t t) { return {t, 0, true}; }
    bool operator==(const CascadeStateId& o) const
    {
        if (terminal || o.terminal) return terminal == o.terminal && episode_t == o.episode_t;
        return episode_t == o.episode_t && level_i == o.level_i;
    }
};

struct Action {
    enum class Kind { Predict, Defer };
    Kind kind = Kind::Defer;
    std::size_t label_index = 0;

    static Action predict(std::size_t index) { return {Kind::Predict, index}; }
    static Action defer() { return {Kind::Defer, 0}; }
    bool is_defer() const { return kind == Kind::Defer; }
    bool operator==(const Action&) const = default;
};

enum class LossKind { ZeroOne, CrossEntropy };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

struct CostModel {
    double mu = 1.0;
    /// c_2..c_N, one per deferral edge.
    std::vector<double> defer_penalties;
    LossKind loss_kind = LossKind::ZeroOne;

    std::size_t levels() const { return defer_penalties.size() + 1; }
    /// μ·c_{i+1}, the charge for deferring out of level i.
    double deferral_charge(std::size_t level_i) const;
    void validate() const;
};

struct EpisodeTrace {
    std::uint64_t episode_t = 0;
    std::vector<std::size_t> levels_visited;
    bool jumped_to_expert = false;
    std::size_t final_level = 0;
    std::size_t prediction = 0;
    std::optional<std::size_t> expert_label;
    std::vector<double> per_level_defer_probs;
    std::vector<double> immediate_costs;
};

/// Loss of committing to label `predicted` when the truth is `truth`.
double prediction_loss(std::size_t predicted, std::size_t truth, std::size_t num_labels, LossKind kind);

/// zero_one: argmax mismatch; cross_entropy: -log(pred[truth]) with the floor.
double prediction_loss(const ProbabilityVector& pred, std::size_t truth, LossKind kind);

/// Σ_y pred[y]·L(y|truth) for zero_one (= 1 - pred[truth]); for cross_entropy the
/// distribution's own cross-entropy against truth.
double expected_prediction_loss(const ProbabilityVector& pred, std::size_t truth, LossKind kind);

/// C_π at a non-expert level: defer·μc_{i+1} + (1 - defer)·E[L].
double immediate_cost(double defer_prob, const ProbabilityVector& pred, std::size_t truth,
                      std::size_t level_i, const CostModel& cost);

/// Product of the deferral probabilities of the preceding levels; 1 for level 1.
double reach_probability(std::span<const double> defer_probs_prefix);

/// Everything Eq.-1-style accounting needs for one episode under a fixed policy.
struct EpisodeCostInputs {
    std::vector<double> defer_probs;               // levels 1..N-1
    std::vector<ProbabilityVector> level_preds;    // levels 1..N-1
    std::size_t truth = 0;
    /// Absent means the expert is taken to be perfect (zero loss).
    std::optional<ProbabilityVector> expert_pred;
};

double episode_cost(const EpisodeCostInputs& episode, const CostModel& cost);
double total_cost(std::span<const EpisodeCostInputs> episodes, const CostModel& cost);

} // namespace cascade

#endif // CASCADE_CORE_TYPES_HPP
