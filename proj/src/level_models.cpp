#include "cascade/level_models.hpp"

#include <cmath>

#include "cascade/random.hpp"

namespace cascade {

double learning_rate(double base_lr, std::uint64_t step)
{
    require(step >= 1, "learning rate step must be >= 1");
    return base_lr / std::sqrt(static_cast<double>(step));
}

void LevelModel::check_batch(std::span<const LabeledExample> batch) const
{
    require(!batch.empty(), "minibatch is empty");
    for (const auto& ex : batch) {
        require(static_cast<std::size_t>(ex.features.size()) == input_dim(), "feature dimension mismatch");
        require(ex.label < num_labels(), "label index out of range");
    }
}

std::size_t parameter_count(const LevelModel& model)
{
    return static_cast<std::size_t>(model.parameters().size());
}

namespace {

double clamped_nll(const Vector& probs, std::size_t label)
{
    return -std::log(std::max(probs(static_cast<Eigen::Index>(label)), kProbabilityFloor));
}

Vector probs_minus_one_hot(const Vector& probs, std::size_t label)
{
    Vector g = probs;
    g(static_cast<Eigen::Index>(label)) -= 1.0;
    return g;
}

bool sparse_finite(const HashedFeatureVector& x)
{
    for (HashedFeatureVector::InnerIterator it(x); it; ++it)
        if (!std::isfinite(it.value())) return false;
    return true;
}

void check_dim(const HashedFeatureVector& x, std::size_t dim)
{
    require(static_cast<std::size_t>(x.size()) == dim, "feature dimension mismatch");
}

void fill_uniform(Matrix& m, double bound, Rng& rng)
{
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = uniform(rng, -bound, bound);
}

void fill_uniform(Vector& v, double bound, Rng& rng)
{
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = uniform(rng, -bound, bound);
}

std::vector<double> to_std(const Vector& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vector from_std(const std::vector<double>& v)
{
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

// ---------------------------------------------------------------------------
// SoftmaxRegression

SoftmaxRegression::SoftmaxRegression(std::size_t input_dim, std::size_t num_labels, double base_lr)
    : LevelModel(base_lr),
      weights_(Matrix::Zero(static_cast<Eigen::Index>(num_labels), static_cast<Eigen::Index>(input_dim))),
      bias_(Vector::Zero(static_cast<Eigen::Index>(num_labels)))
{
    require(num_labels >= 2 && input_dim >= 1, "softmax regression needs >= 2 labels and dim >= 1");
}

Vector SoftmaxRegression::logits(const HashedFeatureVector& x) const
{
    check_dim(x, input_dim());
    Vector z = bias_;
    for (HashedFeatureVector::InnerIterator it(x); it; ++it) z.noalias() += it.value() * weights_.col(it.index());
    return z;
}

ProbabilityVector SoftmaxRegression::predict(const HashedFeatureVector& x) const
{
    return ProbabilityVector(softmax(logits(x)));
}

double SoftmaxRegression::loss(std::span<const LabeledExample> batch) const
{
    check_batch(batch);
    double total = 0.0;
    for (const auto& ex : batch) total += clamped_nll(softmax(logits(ex.features)), ex.label);
    return total / static_cast<double>(batch.size());
}

Vector SoftmaxRegression::gradient(std::span<const LabeledExample> batch) const
{
    check_batch(batch);
    Matrix dw = Matrix::Zero(weights_.rows(), weights_.cols());
    Vector db = Vector::Zero(bias_.size());
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
        const Vector g = probs_minus_one_hot(softmax(logits(ex.features)), ex.label) * scale;
        for (HashedFeatureVector::InnerIterator it(ex.features); it; ++it) dw.col(it.index()) += it.value() * g;
        db += g;
    }
    Vector flat(dw.size() + db.size());
    flat << Eigen::Map<const Vector>(dw.data(), dw.size()), db;
    return flat;
}

void SoftmaxRegression::update(std::span<const LabeledExample> batch)
{
    check_batch(batch);
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<Vector> signals;
    signals.reserve(batch.size());
    for (const auto& ex : batch) {
        Vector g = probs_minus_one_hot(softmax(logits(ex.features)), ex.label) * scale;
        if (!g.allFinite() || !sparse_finite(ex.features))
            throw NumericFailure("non-finite gradient in softmax regression update");
        signals.push_back(std::move(g));
    }

    const double lr = learning_rate(base_lr_, step_count_ + 1);
    for (std::size_t k = 0; k < batch.size(); ++k) {
        for (HashedFeatureVector::InnerIterator it(batch[k].features); it; ++it)
            weights_.col(it.index()).noalias() -= (lr * it.value()) * signals[k];
        bias_.noalias() -= lr * signals[k];
    }
    ++step_count_;
}

Vector SoftmaxRegression::parameters() const
{
    Vector flat(weights_.size() + bias_.size());
    flat << Eigen::Map<const Vector>(weights_.data(), weights_.size()), bias_;
    return flat;
}

void SoftmaxRegression::set_parameters(const Vector& flat)
{
    require(flat.size() == weights_.size() + bias_.size(), "parameter count mismatch");
    require(flat.allFinite(), "parameters must be finite");
    weights_ = Eigen::Map<const Matrix>(flat.data(), weights_.rows(), weights_.cols());
    bias_ = flat.tail(bias_.size());
}

ParameterSnapshot SoftmaxRegression::snapshot() const
{
    return {ModelKind::SoftmaxRegression,
            {static_cast<std::uint64_t>(input_dim()), static_cast<std::uint64_t>(num_labels())},
            step_count_,
            to_std(parameters())};
}

void SoftmaxRegression::restore(const ParameterSnapshot& snap)
{
    if (snap.kind != ModelKind::SoftmaxRegression || snap.dims.size() != 2 || snap.dims[0] != input_dim() ||
        snap.dims[1] != num_labels())
        throw ContractViolation("snapshot does not match this softmax regression model");
    set_parameters(from_std(snap.params));
    step_count_ = snap.step_count;
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::size_t input_dim, std::size_t num_labels, std::size_t hidden, double base_lr, std::uint64_t seed)
    : LevelModel(base_lr),
      w1_(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(input_dim)),
      b1_(static_cast<Eigen::Index>(hidden)),
      w2_(static_cast<Eigen::Index>(num_labels), static_cast<Eigen::Index>(hidden)),
      b2_(static_cast<Eigen::Index>(num_labels))
{
    require(num_labels >= 2 && input_dim >= 1 && hidden >= 1, "mlp needs >= 2 labels, dim >= 1, hidden >= 1");
    Rng rng(seed);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    fill_uniform(w1_, bound1, rng);
    fill_uniform(b1_, bound1, rng);
    fill_uniform(w2_, bound2, rng);
    fill_uniform(b2_, bound2, rng);
}

Mlp::Forward Mlp::forward(const HashedFeatureVector& x) const
{
    check_dim(x, input_dim());
    Vector pre = b1_;
    for (HashedFeatureVector::InnerIterator it(x); it; ++it) pre.noalias() += it.value() * w1_.col(it.index());
    Forward f;
    f.hidden = pre.array().tanh().matrix();
    f.probs = softmax(w2_ * f.hidden + b2_);
    return f;
}

Mlp::Backward Mlp::backward(const Forward& f, std::size_t label) const
{
    Backward b;
    b.d_logits = probs_minus_one_hot(f.probs, label);
    const Vector d_hidden = w2_.transpose() * b.d_logits;
    b.d_pre = d_hidden.array() * (1.0 - f.hidden.array().square());
    return b;
}

ProbabilityVector Mlp::predict(const HashedFeatureVector& x) const
{
    return ProbabilityVector(forward(x).probs);
}

double Mlp::loss(std::span<const LabeledExample> batch) const
{
    check_batch(batch);
    double total = 0.0;
    for (const auto& ex : batch) total += clamped_nll(forward(ex.features).probs, ex.label);
    return total / static_cast<double>(batch.size());
}

Vector Mlp::gradient(std::span<const LabeledExample> batch) const
{
    check_batch(batch);
    Matrix dw1 = Matrix::Zero(w1_.rows(), w1_.cols());
    Vector db1 = Vector::Zero(b1_.size());
    Matrix dw2 = Matrix::Zero(w2_.rows(), w2_.cols());
    Vector db2 = Vector::Zero(b2_.size());
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
        const Forward f = forward(ex.features);
        const Backward b = backward(f, ex.label);
        for (HashedFeatureVector::InnerIterator it(ex.features); it; ++it)
            dw1.col(it.index()) += (scale * it.value()) * b.d_pre;
        db1 += scale * b.d_pre;
        dw2 += scale * b.d_logits * f.hidden.transpose();
        db2 += scale * b.d_logits;
    }
    Vector flat(dw1.size() + db1.size() + dw2.size() + db2.size());
    flat << Eigen::Map<const Vector>(dw1.data(), dw1.size()), db1, Eigen::Map<const Vector>(dw2.data(), dw2.size()),
        db2;
    return flat;
}

void Mlp::update(std::span<const LabeledExample> batch)
{
    check_batch(batch);
    const double scale = 1.0 / static_cast<double>(batch.size());

    // All signals are taken at the pre-update parameters.
    std::vector<Backward> signals;
    Matrix dw2 = Matrix::Zero(w2_.rows(), w2_.cols());
    Vector db2 = Vector::Zero(b2_.size());
    signals.reserve(batch.size());
    for (const auto& ex : batch) {
        const Forward f = forward(ex.features);
        Backward b = backward(f, ex.label);
        if (!b.d_pre.allFinite() || !b.d_logits.allFinite() || !sparse_finite(ex.features))
            throw NumericFailure("non-finite gradient in mlp update");
        dw2.noalias() += scale * b.d_logits * f.hidden.transpose();
        db2 += scale * b.d_logits;
        signals.push_back(std::move(b));
    }

    const double lr = learning_rate(base_lr_, step_count_ + 1);
    for (std::size_t k = 0; k < batch.size(); ++k) {
        for (HashedFeatureVector::InnerIterator it(batch[k].features); it; ++it)
            w1_.col(it.index()).noalias() -= (lr * scale * it.value()) * signals[k].d_pre;
        b1_.noalias() -= (lr * scale) * signals[k].d_pre;
    }
    w2_.noalias() -= lr * dw2;
    b2_.noalias() -= lr * db2;
    ++step_count_;
}

Vector Mlp::parameters() const
{
    Vector flat(w1_.size() + b1_.size() + w2_.size() + b2_.size());
    flat << Eigen::Map<const Vector>(w1_.data(), w1_.size()), b1_, Eigen::Map<const Vector>(w2_.data(), w2_.size()),
        b2_;
    return flat;
}

void Mlp::set_parameters(const Vector& flat)
{
    require(flat.size() == w1_.size() + b1_.size() + w2_.size() + b2_.size(), "parameter count mismatch");
    require(flat.allFinite(), "parameters must be finite");
    Eigen::Index offset = 0;
    w1_ = Eigen::Map<const Matrix>(flat.data() + offset, w1_.rows(), w1_.cols());
    offset += w1_.size();
    b1_ = flat.segment(offset, b1_.size());
    offset += b1_.size();
    w2_ = Eigen::Map<const Matrix>(flat.data() + offset, w2_.rows(), w2_.cols());
    offset += w2_.size();
    b2_ = flat.segment(offset, b2_.size());
}

ParameterSnapshot Mlp::snapshot() const
{
    return {ModelKind::Mlp,
            {static_cast<std::uint64_t>(input_dim()), static_cast<std::uint64_t>(hidden()),
             static_cast<std::uint64_t>(num_labels())},
            step_count_,
            to_std(parameters())};
}

void Mlp::restore(const ParameterSnapshot& snap)
{
    if (snap.kind != ModelKind::Mlp || snap.dims.size() != 3 || snap.dims[0] != input_dim() ||
        snap.dims[1] != hidden() || snap.dims[2] != num_labels())
        throw ContractViolation("snapshot does not match this mlp");
    set_parameters(from_std(snap.params));
    step_count_ = snap.step_count;
}

} // namespace cascade
