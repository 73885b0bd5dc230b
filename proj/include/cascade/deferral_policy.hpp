#ifndef CASCADE_DEFERRAL_POLICY_HPP
#define CASCADE_DEFERRAL_POLICY_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>

#include "cascade/core_types.hpp"
#include "cascade/random.hpp"
#include "cascade/snapshot.hpp"

namespace cascade {

/// (m_i's prediction, whether its argmax disagreed with the expert).
struct CalibrationSample {
    std::size_t level_i = 1;
    ProbabilityVector pred;
    double target = 0.0;
    bool expert_consulted = false;
};

/// z_i = 1 iff argmax(pred) differs from the expert's label.
CalibrationSample make_calibration_sample(std::size_t level_i, ProbabilityVector pred, std::size_t expert_label);

/// f_i: maps m_i's distribution to a deferral probability.
class DeferralFunction {
public:
    virtual ~DeferralFunction() = default;

    virtual std::size_t level() const = 0;
    virtual double defer_probability(const ProbabilityVector& pred) const = 0;
    /// One OGD step on mean squared error against the targets.
    virtual void calibrate(std::span<const CalibrationSample> batch) = 0;
    /// False for scripted gates that ignore calibration data.
    virtual bool trainable() const { return true; }
    virtual std::unique_ptr<DeferralFunction> clone() const = 0;
    virtual std::uint64_t step_count() const { return 0; }

protected:
    void check_batch(std::span<const CalibrationSample> batch) const;
};

/// |Y| → hidden (tanh) → 1 (sigmoid). The output layer starts at zero so an
/// untrained calibrator answers exactly 0.5.
///
/// Flat parameter layout: W1 (hidden × labels, column-major), b1, w2, b2.
class CalibratorMlp final : public DeferralFunction {
public:
    static constexpr std::size_t kDefaultHidden = 16;

    CalibratorMlp(std::size_t level_i, std::size_t num_labels, double base_lr = 1.0, std::uint64_t seed = 1,
                  std::size_t hidden = kDefaultHidden);

    std::size_t level() const override { return level_; }
    double defer_probability(const ProbabilityVector& pred) const override;
    void calibrate(std::span<const CalibrationSample> batch) override;
    std::unique_ptr<DeferralFunction> clone() const override { return std::make_unique<CalibratorMlp>(*this); }
    std::uint64_t step_count() const override { return step_count_; }

    double loss(std::span<const CalibrationSample> batch) const;
    Vector gradient(std::span<const CalibrationSample> batch) const;
    Vector parameters() const;
    void set_parameters(const Vector& flat);

    ParameterSnapshot snapshot() const;
    void restore(const ParameterSnapshot& snap);

    std::size_t num_labels() const { return static_cast<std::size_t>(w1_.cols()); }
    std::size_t hidden() const { return static_cast<std::size_t>(w1_.rows()); }

private:
    struct Forward {
        Vector hidden;
        double out = 0.5;
    };
    Forward forward(const Vector& p) const;

    std::size_t level_;
    double base_lr_;
    std::uint64_t step_count_ = 0;
    Matrix w1_;
    Vector b1_;
    Vector w2_;
    double b2_ = 0.0;
};

/// A gate with a fixed deferral probability. Calibration only validates input.
class ConstantDeferral final : public DeferralFunction {
public:
    ConstantDeferral(std::size_t level_i, double defer_prob);

    std::size_t level() const override { return level_; }
    double defer_probability(const ProbabilityVector&) const override { return p_; }
    void calibrate(std::span<const CalibrationSample> batch) override { check_batch(batch); }
    bool trainable() const override { return false; }
    std::unique_ptr<DeferralFunction> clone() const override { return std::make_unique<ConstantDeferral>(*this); }

private:
    std::size_t level_;
    double p_;
};

/// Threshold rule: Defer iff f_i(pred) > 0.5, else Predict(argmax).
Action decide(const DeferralFunction& f, const ProbabilityVector& pred);

/// Defer with probability f_i(pred), else Predict(argmax).
Action stochastic_defer(const DeferralFunction& f, const ProbabilityVector& pred, Rng& rng);

/// Same rules applied to an already-computed deferral probability.
Action decide_from_probability(double defer_prob, const ProbabilityVector& pred);
Action sample_from_probability(double defer_prob, const ProbabilityVector& pred, Rng& rng);

} // namespace cascade

#endif // CASCADE_DEFERRAL_POLICY_HPP
