#ifndef CASCADE_MATH_HPP
#define CASCADE_MATH_HPP

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace cascade {

// Numerically stable softmax over a column of logits.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::MatrixBase<Derived>& logits)
{
    using Scalar = typename Derived::Scalar;
    const Scalar shift = logits.maxCoeff();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (logits.array() - shift).exp().matrix();
    return e / e.sum();
}

template <typename Scalar>
Scalar sigmoid(Scalar x)
{
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m)
{
    return m.allFinite();
}

// Learning-rate schedule base·t^{-1/2}; t counts from 1.
double learning_rate(double base_lr, std::uint64_t step);

} // namespace cascade

#endif // CASCADE_MATH_HPP
