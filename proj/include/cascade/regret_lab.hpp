#ifndef CASCADE_REGRET_LAB_HPP
#define CASCADE_REGRET_LAB_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cascade/core_types.hpp"
#include "cascade/errors.hpp"
#include "cascade/random.hpp"

namespace cascade::regret {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// Domains and projection

template <typename Scalar>
struct Ball {
    VectorX<Scalar> center;
    Scalar radius;
};

template <typename Scalar>
struct Box {
    VectorX<Scalar> lo;
    VectorX<Scalar> hi;
};

template <typename Scalar>
using Domain = std::variant<Ball<Scalar>, Box<Scalar>>;

template <typename Scalar>
Eigen::Index dimension(const Domain<Scalar>& domain)
{
    return std::visit([](const auto& d) -> Eigen::Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(d)>, Ball<Scalar>>)
            return d.center.size();
        else
            return d.lo.size();
    }, domain);
}

/// Largest distance between two points of the domain (‖M‖).
template <typename Scalar>
Scalar diameter(const Domain<Scalar>& domain)
{
    return std::visit([](const auto& d) -> Scalar {
        if constexpr (std::is_same_v<std::decay_t<decltype(d)>, Ball<Scalar>>)
            return Scalar(2) * d.radius;
        else
            return (d.hi - d.lo).norm();
    }, domain);
}

/// Euclidean projection; closed form for both domain shapes.
template <typename Scalar>
VectorX<Scalar> project(const Domain<Scalar>& domain, const VectorX<Scalar>& x)
{
    return std::visit([&x](const auto& d) -> VectorX<Scalar> {
        if constexpr (std::is_same_v<std::decay_t<decltype(d)>, Ball<Scalar>>) {
            const VectorX<Scalar> offset = x - d.center;
            const Scalar r = offset.norm();
            if (r <= d.radius) return x;
            return d.center + offset * (d.radius / r);
        } else {
            return x.cwiseMax(d.lo).cwiseMin(d.hi);
        }
    }, domain);
}

template <typename Scalar>
bool contains(const Domain<Scalar>& domain, const VectorX<Scalar>& x, Scalar tol = Scalar(1e-12))
{
    return (project(domain, x) - x).norm() <= tol;
}

/// One projected online-gradient-descent step: P(params - eta·gradient).
template <typename Scalar>
VectorX<Scalar> projected_ogd_step(const VectorX<Scalar>& params, const VectorX<Scalar>& gradient,
                                   const Domain<Scalar>& domain, Scalar eta)
{
    require(eta > Scalar(0), "step size must be positive");
    return project(domain, VectorX<Scalar>(params - eta * gradient));
}

/// ‖M‖²√T/2 + (√T - 1/2)‖∇c‖², the no-regret bound for η_t = t^{-1/2}.
template <typename Scalar>
Scalar regret_bound(Scalar norm_M, Scalar norm_gradc, std::uint64_t T)
{
    require(T >= 1, "regret bound needs T >= 1");
    require(norm_M >= Scalar(0) && norm_gradc >= Scalar(0), "norms must be nonnegative");
    const Scalar root = std::sqrt(static_cast<Scalar>(T));
    return norm_M * norm_M * root / Scalar(2) + (root - Scalar(0.5)) * norm_gradc * norm_gradc;
}

// ---------------------------------------------------------------------------
// Loss streams

/// Convex per-step costs c^t over a bounded domain, t = 1..horizon().
template <typename Scalar>
class ConvexLossStream {
public:
    explicit ConvexLossStream(Domain<Scalar> domain) : domain_(std::move(domain)) {}
    virtual ~ConvexLossStream() = default;

    virtual std::uint64_t horizon() const = 0;
    virtual Scalar loss(std::uint64_t t, const VectorX<Scalar>& m) const = 0;
    virtual VectorX<Scalar> gradient(std::uint64_t t, const VectorX<Scalar>& m) const = 0;
    /// Upper bound on ‖∇c^t(m)‖ over the domain and all t.
    virtual Scalar gradient_bound() const = 0;

    /// argmin over the domain of Σ_{t≤T} c^t. Default: refined grid search.
    virtual VectorX<Scalar> hindsight_minimizer(std::uint64_t T) const;

    Scalar cumulative_loss(std::uint64_t T, const VectorX<Scalar>& m) const
    {
        Scalar total = 0;
        for (std::uint64_t t = 1; t <= T; ++t) total += loss(t, m);
        return total;
    }

    const Domain<Scalar>& domain() const { return domain_; }
    Scalar domain_diameter() const { return diameter(domain_); }
    Eigen::Index dim() const { return dimension(domain_); }

protected:
    Domain<Scalar> domain_;
};

/// c^t(m) = ‖m - z_t‖² with targets z_t = P(m* + noise), noise uniform in a ball.
template <typename Scalar>
class QuadraticLossStream final : public ConvexLossStream<Scalar> {
public:
    QuadraticLossStream(Domain<Scalar> domain, VectorX<Scalar> optimum, Scalar noise_radius, std::uint64_t horizon,
                        std::uint64_t seed)
        : ConvexLossStream<Scalar>(std::move(domain))
    {
        require(contains(this->domain_, optimum, Scalar(1e-9)), "quadratic optimum must lie in the domain");
        Rng rng(seed);
        const Eigen::Index d = optimum.size();
        targets_.reserve(horizon);
        for (std::uint64_t t = 0; t < horizon; ++t) {
            VectorX<Scalar> dir(d);
            for (Eigen::Index k = 0; k < d; ++k) dir(k) = static_cast<Scalar>(normal(rng, 0.0, 1.0));
            const Scalar n = dir.norm();
            const Scalar r = noise_radius * std::pow(static_cast<Scalar>(uniform01(rng)), Scalar(1) / Scalar(d));
            VectorX<Scalar> z = optimum;
            if (n > Scalar(0)) z += dir * (r / n);
            targets_.push_back(project(this->domain_, z));
        }
        prefix_.reserve(horizon + 1);
        prefix_.push_back(VectorX<Scalar>::Zero(d));
        for (const auto& z : targets_) prefix_.push_back(prefix_.back() + z);
    }

    std::uint64_t horizon() const override { return targets_.size(); }
    Scalar loss(std::uint64_t t, const VectorX<Scalar>& m) const override { return (m - target(t)).squaredNorm(); }
    VectorX<Scalar> gradient(std::uint64_t t, const VectorX<Scalar>& m) const override
    {
        return Scalar(2) * (m - target(t));
    }
    // m and z_t both lie in the domain.
    Scalar gradient_bound() const override { return Scalar(2) * this->domain_diameter(); }

    // Σ‖m - z_t‖² = T‖m - mean‖² + const, so the projected mean is optimal.
    VectorX<Scalar> hindsight_minimizer(std::uint64_t T) const override
    {
        require(T >= 1 && T <= horizon(), "hindsight horizon out of range");
        return project(this->domain_, VectorX<Scalar>(prefix_[T] / static_cast<Scalar>(T)));
    }

    const VectorX<Scalar>& target(std::uint64_t t) const
    {
        require(t >= 1 && t <= horizon(), "loss index out of range");
        return targets_[t - 1];
    }

private:
    std::vector<VectorX<Scalar>> targets_;
    std::vector<VectorX<Scalar>> prefix_;
};

/// c^t(m) = g_t·m with g_t = (-1)^{t+1}·g.
template <typename Scalar>
class AlternatingLinearStream final : public ConvexLossStream<Scalar> {
public:
    AlternatingLinearStream(Domain<Scalar> domain, VectorX<Scalar> g, std::uint64_t horizon)
        : ConvexLossStream<Scalar>(std::move(domain)), g_(std::move(g)), horizon_(horizon)
    {
    }

    std::uint64_t horizon() const override { return horizon_; }
    Scalar loss(std::uint64_t t, const VectorX<Scalar>& m) const override { return slope(t).dot(m); }
    VectorX<Scalar> gradient(std::uint64_t t, const VectorX<Scalar>&) const override { return slope(t); }
    Scalar gradient_bound() const override { return g_.norm(); }

    // Linear objective: minimized at the boundary point opposite Σg_t.
    VectorX<Scalar> hindsight_minimizer(std::uint64_t T) const override
    {
        const VectorX<Scalar> sum = (T % 2 == 1) ? g_ : VectorX<Scalar>::Zero(g_.size());
        return std::visit([&sum](const auto& d) -> VectorX<Scalar> {
            if constexpr (std::is_same_v<std::decay_t<decltype(d)>, Ball<Scalar>>) {
                const Scalar n = sum.norm();
                if (n == Scalar(0)) return d.center;
                return d.center - sum * (d.radius / n);
            } else {
                VectorX<Scalar> m(sum.size());
                for (Eigen::Index k = 0; k < sum.size(); ++k) m(k) = sum(k) > 0 ? d.lo(k) : d.hi(k);
                return m;
            }
        }, this->domain_);
    }

private:
    VectorX<Scalar> slope(std::uint64_t t) const
    {
        require(t >= 1 && t <= horizon_, "loss index out of range");
        return (t % 2 == 1) ? g_ : VectorX<Scalar>(-g_);
    }

    VectorX<Scalar> g_;
    std::uint64_t horizon_;
};

/// Piecewise-linear c^t(m) = |a_t·m - b_t| with unit a_t and b_t in [-b_max, b_max].
/// Hindsight minimizer comes from the generic grid search.
template <typename Scalar>
class AbsoluteDeviationStream final : public ConvexLossStream<Scalar> {
public:
    AbsoluteDeviationStream(Domain<Scalar> domain, std::uint64_t horizon, Scalar b_max, std::uint64_t seed)
        : ConvexLossStream<Scalar>(std::move(domain))
    {
        Rng rng(seed);
        const Eigen::Index d = this->dim();
        for (std::uint64_t t = 0; t < horizon; ++t) {
            VectorX<Scalar> a(d);
            do {
                for (Eigen::Index k = 0; k < d; ++k) a(k) = static_cast<Scalar>(normal(rng, 0.0, 1.0));
            } while (a.norm() == Scalar(0));
            a.normalize();
            a_.push_back(a);
            b_.push_back(static_cast<Scalar>(uniform(rng, -static_cast<double>(b_max), static_cast<double>(b_max))));
        }
    }

    std::uint64_t horizon() const override { return a_.size(); }
    Scalar loss(std::uint64_t t, const VectorX<Scalar>& m) const override
    {
        return std::abs(a_.at(t - 1).dot(m) - b_.at(t - 1));
    }
    VectorX<Scalar> gradient(std::uint64_t t, const VectorX<Scalar>& m) const override
    {
        const Scalar r = a_.at(t - 1).dot(m) - b_.at(t - 1);
        const Scalar s = r > 0 ? Scalar(1) : (r < 0 ? Scalar(-1) : Scalar(0));
        return s * a_.at(t - 1);
    }
    Scalar gradient_bound() const override { return Scalar(1); }

private:
    std::vector<VectorX<Scalar>> a_;
    std::vector<Scalar> b_;
};

template <typename Scalar>
VectorX<Scalar> ConvexLossStream<Scalar>::hindsight_minimizer(std::uint64_t T) const
{
    const Eigen::Index d = dim();
    require(d >= 1 && d <= 2, "grid-search hindsight minimizer supports 1-D and 2-D domains only");

    // Bounding box of the domain.
    VectorX<Scalar> lo(d), hi(d);
    std::visit([&](const auto& dom) {
        if constexpr (std::is_same_v<std::decay_t<decltype(dom)>, Ball<Scalar>>) {
            lo = dom.center.array() - dom.radius;
            hi = dom.center.array() + dom.radius;
        } else {
            lo = dom.lo;
            hi = dom.hi;
        }
    }, domain_);

    constexpr int kPoints = 41;
    constexpr int kRounds = 6;
    VectorX<Scalar> best = project(domain_, VectorX<Scalar>((lo + hi) / Scalar(2)));
    Scalar best_cost = cumulative_loss(T, best);
    for (int round = 0; round < kRounds; ++round) {
        const VectorX<Scalar> step = (hi - lo) / Scalar(kPoints - 1);
        const int ny = d == 2 ? kPoints : 1;
        for (int ix = 0; ix < kPoints; ++ix) {
            for (int iy = 0; iy < ny; ++iy) {
                VectorX<Scalar> m(d);
                m(0) = lo(0) + step(0) * ix;
                if (d == 2) m(1) = lo(1) + step(1) * iy;
                m = project(domain_, m);
                const Scalar c = cumulative_loss(T, m);
                if (c < best_cost) {
                    best_cost = c;
                    best = m;
                }
            }
        }
        // Zoom to two grid cells around the incumbent.
        lo = best - Scalar(2) * step;
        hi = best + Scalar(2) * step;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Ensemble regret

/// Fixed mixing weights over N models and each model's starting point.
template <typename Scalar>
struct EnsemblePolicy {
    std::vector<Scalar> weights;
    std::vector<VectorX<Scalar>> initial;

    void validate(Eigen::Index dim) const
    {
        require(!weights.empty() && weights.size() == initial.size(), "ensemble needs one start point per weight");
        Scalar sum = 0;
        for (Scalar w : weights) {
            require(w >= Scalar(0), "ensemble weights must be nonnegative");
            sum += w;
        }
        require(std::abs(sum - Scalar(1)) <= Scalar(1e-9), "ensemble weights must sum to 1");
        for (const auto& m : initial) require(m.size() == dim, "ensemble start point has the wrong dimension");
    }
};

template <typename Scalar>
struct RegretCheckpoint {
    std::uint64_t T = 0;
    Scalar measured_regret = 0;
    Scalar bound = 0;
    Scalar avg_regret = 0;
};

template <typename Scalar>
struct EnsembleRegretResult {
    Scalar regret = 0;
    Scalar learner_cost = 0;
    Scalar hindsight_cost = 0;
    VectorX<Scalar> hindsight_minimizer;
    std::vector<RegretCheckpoint<Scalar>> checkpoints;
};

/// Runs projected OGD (η_t = t^{-1/2}) for every ensemble member over the
/// first T costs and measures γ = Σ_t Σ_i w_i c^t(m_i^t) - min_m Σ_t c^t(m).
/// The comparator separates per member and Σw_i = 1, so one hindsight
/// minimizer serves all members. Checkpoints (each ≤ T) report γ on prefixes.
template <typename Scalar>
EnsembleRegretResult<Scalar> ensemble_regret(const ConvexLossStream<Scalar>& stream,
                                             const EnsemblePolicy<Scalar>& ensemble, std::uint64_t T,
                                             std::span<const std::uint64_t> checkpoints = {})
{
    ensemble.validate(stream.dim());
    require(T <= stream.horizon(), "T exceeds the loss stream horizon");

    EnsembleRegretResult<Scalar> result;
    if (T == 0) {
        result.hindsight_minimizer = project(stream.domain(), VectorX<Scalar>(ensemble.initial.front()));
        return result;
    }

    std::vector<VectorX<Scalar>> params;
    for (const auto& m : ensemble.initial) params.push_back(project(stream.domain(), m));

    std::vector<std::uint64_t> marks(checkpoints.begin(), checkpoints.end());
    std::sort(marks.begin(), marks.end());
    auto next_mark = marks.begin();

    const Scalar norm_M = stream.domain_diameter();
    const Scalar norm_g = stream.gradient_bound();
    Scalar learner = 0;
    for (std::uint64_t t = 1; t <= T; ++t) {
        const Scalar eta = Scalar(1) / std::sqrt(static_cast<Scalar>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Scalar c = stream.loss(t, params[i]);
            if (!std::isfinite(static_cast<double>(c))) throw NumericFailure("non-finite loss in regret run");
            learner += ensemble.weights[i] * c;
            params[i] = projected_ogd_step(params[i], stream.gradient(t, params[i]), stream.domain(), eta);
        }
        while (next_mark != marks.end() && *next_mark == t) {
            const VectorX<Scalar> m_star = stream.hindsight_minimizer(t);
            const Scalar gamma = learner - stream.cumulative_loss(t, m_star);
            result.checkpoints.push_back({t, gamma, regret_bound(norm_M, norm_g, t), gamma / static_cast<Scalar>(t)});
            ++next_mark;
        }
    }

    result.learner_cost = learner;
    result.hindsight_minimizer = stream.hindsight_minimizer(T);
    result.hindsight_cost = stream.cumulative_loss(T, result.hindsight_minimizer);
    result.regret = learner - result.hindsight_cost;
    return result;
}

// ---------------------------------------------------------------------------
// Deferral theory

/// 0 (keep) when μ·c_{i+1} - ε_i > 0, 1 (defer) otherwise.
int optimal_deferral_rule(double mu, double c_next, double epsilon_i);

/// Mean of the last `window` losses (all of them when fewer are available).
double trailing_loss_estimate(std::span<const double> losses, std::size_t window = 500);

/// Deterministic constant gates: gate[i] == true means level i+1 always defers.
struct CascadeGateResult {
    std::vector<bool> always_defer;
    double J = 0.0;
    std::vector<double> all_J; // indexed by the bitmask of always_defer
};

/// Best of all 2^{N-1} always/never-defer assignments on recorded episodes.
CascadeGateResult hindsight_best_cascade(std::span<const EpisodeCostInputs> episodes, const CostModel& cost);

/// J of one constant-gate assignment (bit i set = level i+1 always defers).
double constant_gate_cost(std::span<const EpisodeCostInputs> episodes, const CostModel& cost, std::uint64_t mask);

/// Largest aggregate small-model cost M with x·M + (1-x)(3M + C) = C, i.e. xC/(3-2x).
double cost_equilibrium(double llm_cost_C, double handled_fraction_x);

void write_regret_csv(std::ostream& out, std::span<const RegretCheckpoint<double>> rows);

} // namespace cascade::regret

#endif // CASCADE_REGRET_LAB_HPP
