#ifndef CASCADE_LEVEL_MODELS_HPP
#define CASCADE_LEVEL_MODELS_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cascade/core_types.hpp"
#include "cascade/featurizer.hpp"
#include "cascade/math.hpp"
#include "cascade/snapshot.hpp"

namespace cascade {

/// One expert demonstration: features and the expert's label.
struct LabeledExample {
    HashedFeatureVector features;
    std::size_t label = 0;
};

/// Online-trainable classifier m_i.
///
/// predict() is const and costs the same for any parameter values. update()
/// takes one OGD step on mean cross-entropy at rate base_lr·t^{-1/2}, where t
/// is this model's own update counter.
class LevelModel {
public:
    virtual ~LevelModel() = default;

    virtual ModelKind kind() const = 0;
    virtual std::size_t input_dim() const = 0;
    virtual std::size_t num_labels() const = 0;

    virtual ProbabilityVector predict(const HashedFeatureVector& x) const = 0;
    virtual void update(std::span<const LabeledExample> batch) = 0;

    /// Mean cross-entropy over the batch.
    virtual double loss(std::span<const LabeledExample> batch) const = 0;
    /// Gradient of loss() with respect to parameters(), same layout.
    virtual Vector gradient(std::span<const LabeledExample> batch) const = 0;

    virtual Vector parameters() const = 0;
    virtual void set_parameters(const Vector& flat) = 0;

    virtual ParameterSnapshot snapshot() const = 0;
    virtual void restore(const ParameterSnapshot& snap) = 0;

    virtual std::unique_ptr<LevelModel> clone() const = 0;

    std::uint64_t step_count() const { return step_count_; }
    double base_learning_rate() const { return base_lr_; }

protected:
    explicit LevelModel(double base_lr) : base_lr_(base_lr) {}
    void check_batch(std::span<const LabeledExample> batch) const;

    double base_lr_;
    std::uint64_t step_count_ = 0;
};

/// Multinomial logistic regression, zero-initialized.
/// Flat parameter layout: W (labels × dim, column-major), then bias.
class SoftmaxRegression final : public LevelModel {
public:
    SoftmaxRegression(std::size_t input_dim, std::size_t num_labels, double base_lr = 1.0);

    ModelKind kind() const override { return ModelKind::SoftmaxRegression; }
    std::size_t input_dim() const override { return static_cast<std::size_t>(weights_.cols()); }
    std::size_t num_labels() const override { return static_cast<std::size_t>(weights_.rows()); }

    ProbabilityVector predict(const HashedFeatureVector& x) const override;
    void update(std::span<const LabeledExample> batch) override;
    double loss(std::span<const LabeledExample> batch) const override;
    Vector gradient(std::span<const LabeledExample> batch) const override;

    Vector parameters() const override;
    void set_parameters(const Vector& flat) override;
    ParameterSnapshot snapshot() const override;
    void restore(const ParameterSnapshot& snap) override;
    std::unique_ptr<LevelModel> clone() const override { return std::make_unique<SoftmaxRegression>(*this); }

    const Matrix& weights() const { return weights_; }
    const Vector& bias() const { return bias_; }

private:
    Vector logits(const HashedFeatureVector& x) const;

    Matrix weights_;
    Vector bias_;
};

/// One tanh hidden layer followed by a softmax output.
/// Flat parameter layout: W1 (hidden × dim), b1, W2 (labels × hidden), b2.
class Mlp final : public LevelModel {
public:
    Mlp(std::size_t input_dim, std::size_t num_labels, std::size_t hidden = 256, double base_lr = 1.0,
        std::uint64_t seed = 1);

    ModelKind kind() const override { return ModelKind::Mlp; }
    std::size_t input_dim() const override { return static_cast<std::size_t>(w1_.cols()); }
    std::size_t num_labels() const override { return static_cast<std::size_t>(w2_.rows()); }
    std::size_t hidden() const { return static_cast<std::size_t>(w1_.rows()); }

    ProbabilityVector predict(const HashedFeatureVector& x) const override;
    void update(std::span<const LabeledExample> batch) override;
    double loss(std::span<const LabeledExample> batch) const override;
    Vector gradient(std::span<const LabeledExample> batch) const override;

    Vector parameters() const override;
    void set_parameters(const Vector& flat) override;
    ParameterSnapshot snapshot() const override;
    void restore(const ParameterSnapshot& snap) override;
    std::unique_ptr<LevelModel> clone() const override { return std::make_unique<Mlp>(*this); }

private:
    struct Forward {
        Vector hidden;
        Vector probs;
    };
    // Per-sample backprop signals; enough to apply the sparse W1 update.
    struct Backward {
        Vector d_logits;
        Vector d_pre;
    };

    Forward forward(const HashedFeatureVector& x) const;
    Backward backward(const Forward& f, std::size_t label) const;

    Matrix w1_;
    Vector b1_;
    Matrix w2_;
    Vector b2_;
};

std::size_t parameter_count(const LevelModel& model);

} // namespace cascade

#endif // CASCADE_LEVEL_MODELS_HPP
