#include "cascade/deferral_policy.hpp"

#include <algorithm>
#include <cmath>

#include "cascade/math.hpp"

namespace cascade {

CalibrationSample make_calibration_sample(std::size_t level_i, ProbabilityVector pred, std::size_t expert_label)
{
    require(expert_label < pred.size(), "expert label out of range");
    const double z = pred.argmax() != expert_label ? 1.0 : 0.0;
    return {level_i, std::move(pred), z, true};
}

void DeferralFunction::check_batch(std::span<const CalibrationSample> batch) const
{
    require(!batch.empty(), "calibration batch is empty");
    for (const auto& s : batch) {
        require(s.level_i == level(), "calibration sample belongs to another level");
        require(s.expert_consulted, "calibration sample from an episode without an expert label");
        require(s.target == 0.0 || s.target == 1.0, "calibration target must be 0 or 1");
    }
}

// ---------------------------------------------------------------------------

CalibratorMlp::CalibratorMlp(std::size_t level_i, std::size_t num_labels, double base_lr, std::uint64_t seed,
                             std::size_t hidden)
    : level_(level_i),
      base_lr_(base_lr),
      w1_(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(num_labels)),
      b1_(static_cast<Eigen::Index>(hidden)),
      w2_(Vector::Zero(static_cast<Eigen::Index>(hidden)))
{
    require(level_i >= 1 && num_labels >= 2 && hidden >= 1, "invalid calibrator shape");
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(num_labels));
    for (Eigen::Index j = 0; j < w1_.cols(); ++j)
        for (Eigen::Index i = 0; i < w1_.rows(); ++i) w1_(i, j) = uniform(rng, -bound, bound);
    for (Eigen::Index i = 0; i < b1_.size(); ++i) b1_(i) = uniform(rng, -bound, bound);
}

CalibratorMlp::Forward CalibratorMlp::forward(const Vector& p) const
{
    require(p.size() == w1_.cols(), "calibrator input size mismatch");
    Forward f;
    f.hidden = (w1_ * p + b1_).array().tanh().matrix();
    f.out = sigmoid(w2_.dot(f.hidden) + b2_);
    return f;
}

double CalibratorMlp::defer_probability(const ProbabilityVector& pred) const
{
    // Keep the open interval even when the sigmoid saturates in double precision.
    return std::clamp(forward(pred.values()).out, 1e-15, 1.0 - 1e-15);
}

double CalibratorMlp::loss(std::span<const CalibrationSample> batch) const
{
    check_batch(batch);
    double total = 0.0;
    for (const auto& s : batch) {
        const double e = forward(s.pred.values()).out - s.target;
        total += e * e;
    }
    return total / static_cast<double>(batch.size());
}

Vector CalibratorMlp::gradient(std::span<const CalibrationSample> batch) const
{
    check_batch(batch);
    Matrix dw1 = Matrix::Zero(w1_.rows(), w1_.cols());
    Vector db1 = Vector::Zero(b1_.size());
    Vector dw2 = Vector::Zero(w2_.size());
    double db2 = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& s : batch) {
        const Forward f = forward(s.pred.values());
        const double d_out = scale * 2.0 * (f.out - s.target) * f.out * (1.0 - f.out);
        const Vector d_pre = (d_out * w2_).array() * (1.0 - f.hidden.array().square());
        dw1.noalias() += d_pre * s.pred.values().transpose();
        db1 += d_pre;
        dw2 += d_out * f.hidden;
        db2 += d_out;
    }
    Vector flat(dw1.size() + db1.size() + dw2.size() + 1);
    flat << Eigen::Map<const Vector>(dw1.data(), dw1.size()), db1, dw2, db2;
    return flat;
}

void CalibratorMlp::calibrate(std::span<const CalibrationSample> batch)
{
    const Vector g = gradient(batch);
    if (!g.allFinite()) throw NumericFailure("non-finite gradient in calibrator update");
    const double lr = learning_rate(base_lr_, step_count_ + 1);
    set_parameters(parameters() - lr * g);
    ++step_count_;
}

Vector CalibratorMlp::parameters() const
{
    Vector flat(w1_.size() + b1_.size() + w2_.size() + 1);
    flat << Eigen::Map<const Vector>(w1_.data(), w1_.size()), b1_, w2_, b2_;
    return flat;
}

void CalibratorMlp::set_parameters(const Vector& flat)
{
    require(flat.size() == w1_.size() + b1_.size() + w2_.size() + 1, "parameter count mismatch");
    require(flat.allFinite(), "parameters must be finite");
    Eigen::Index offset = 0;
    w1_ = Eigen::Map<const Matrix>(flat.data(), w1_.rows(), w1_.cols());
    offset += w1_.size();
    b1_ = flat.segment(offset, b1_.size());
    offset += b1_.size();
    w2_ = flat.segment(offset, w2_.size());
    offset += w2_.size();
    b2_ = flat(offset);
}

ParameterSnapshot CalibratorMlp::snapshot() const
{
    const Vector p = parameters();
    return {ModelKind::Calibrator,
            {static_cast<std::uint64_t>(level_), static_cast<std::uint64_t>(num_labels()),
             static_cast<std::uint64_t>(hidden())},
            step_count_,
            std::vector<double>(p.data(), p.data() + p.size())};
}

void CalibratorMlp::restore(const ParameterSnapshot& snap)
{
    if (snap.kind != ModelKind::Calibrator || snap.dims.size() != 3 || snap.dims[0] != level_ ||
        snap.dims[1] != num_labels() || snap.dims[2] != hidden())
        throw ContractViolation("snapshot does not match this calibrator");
    set_parameters(Eigen::Map<const Vector>(snap.params.data(), static_cast<Eigen::Index>(snap.params.size())));
    step_count_ = snap.step_count;
}

// ---------------------------------------------------------------------------

ConstantDeferral::ConstantDeferral(std::size_t level_i, double defer_prob) : level_(level_i), p_(defer_prob)
{
    require(defer_prob >= 0.0 && defer_prob <= 1.0, "defer probability outside [0,1]");
}

Action decide_from_probability(double defer_prob, const ProbabilityVector& pred)
{
    if (defer_prob > 0.5) return Action::defer();
    return Action::predict(pred.argmax());
}

Action sample_from_probability(double defer_prob, const ProbabilityVector& pred, Rng& rng)
{
    if (bernoulli(rng, defer_prob)) return Action::defer();
    return Action::predict(pred.argmax());
}

Action decide(const DeferralFunction& f, const ProbabilityVector& pred)
{
    return decide_from_probability(f.defer_probability(pred), pred);
}

Action stochastic_defer(const DeferralFunction& f, const ProbabilityVector& pred, Rng& rng)
{
    return sample_from_probability(f.defer_probability(pred), pred, rng);
}

} // namespace cascade
