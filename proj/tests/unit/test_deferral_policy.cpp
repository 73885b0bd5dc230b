#include <doctest.h>

#include "cascade/deferral_policy.hpp"
#include "cascade/errors.hpp"
#include "cascade/level_models.hpp"
#include "test_support.hpp"

using namespace cascade;

namespace {

ProbabilityVector pv(double a, double b)
{
    Vector v(2);
    v << a, b;
    return ProbabilityVector(v);
}

CalibrationSample sample(const ProbabilityVector& p, double z, std::size_t level = 1)
{
    return {level, p, z, true};
}

} // namespace

TEST_CASE("untrained calibrator answers exactly one half")
{
    Rng rng(1);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CalibratorMlp f(1, 3, 1.0, seed);
        for (int k = 0; k < 20; ++k) CHECK(f.defer_probability(testing::random_distribution(rng, 3)) == 0.5);
    }
}

TEST_CASE("calibration sample targets come from argmax agreement")
{
    CHECK(make_calibration_sample(1, pv(0.9, 0.1), 0).target == 0.0);
    CHECK(make_calibration_sample(1, pv(0.9, 0.1), 1).target == 1.0);
    CHECK(make_calibration_sample(2, pv(0.5, 0.5), 0).target == 0.0);
    const auto s = make_calibration_sample(2, pv(0.3, 0.7), 0);
    CHECK(s.level_i == 2);
    CHECK(s.expert_consulted);
}

TEST_CASE("decide uses a strict 0.5 threshold")
{
    CHECK(decide_from_probability(0.6, pv(0.7, 0.3)).is_defer());
    CHECK(decide_from_probability(0.5, pv(0.3, 0.7)) == Action::predict(1));
    CHECK(decide_from_probability(0.2, pv(0.5, 0.5)) == Action::predict(0));
    CHECK(decide(ConstantDeferral(1, 0.6), pv(0.9, 0.1)).is_defer());
    CHECK(decide(ConstantDeferral(1, 0.5), pv(0.9, 0.1)) == Action::predict(0));
}

TEST_CASE("stochastic defer matches its probability")
{
    Rng rng(77);
    const auto p = pv(0.8, 0.2);
    for (int k = 0; k < 100; ++k) {
        CHECK(stochastic_defer(ConstantDeferral(1, 1.0), p, rng).is_defer());
        CHECK(stochastic_defer(ConstantDeferral(1, 0.0), p, rng) == Action::predict(0));
    }
    const ConstantDeferral f(1, 0.3);
    int defers = 0;
    for (int k = 0; k < 10000; ++k) defers += stochastic_defer(f, p, rng).is_defer() ? 1 : 0;
    CHECK(defers / 10000.0 >= 0.286);
    CHECK(defers / 10000.0 <= 0.314);
}

TEST_CASE("repeated positive targets push the probability toward one")
{
    CalibratorMlp up(1, 2, 1.0, 3);
    const auto p = pv(0.7, 0.3);
    const std::vector<CalibrationSample> ones(4, sample(p, 1.0));
    double last = up.defer_probability(p);
    for (int k = 0; k < 200; ++k) {
        up.calibrate(ones);
        const double now = up.defer_probability(p);
        CHECK(now > last);
        last = now;
    }
    CHECK(last > 0.8);

    CalibratorMlp down(1, 2, 1.0, 3);
    const std::vector<CalibrationSample> zeros(4, sample(p, 0.0));
    last = down.defer_probability(p);
    for (int k = 0; k < 200; ++k) {
        down.calibrate(zeros);
        const double now = down.defer_probability(p);
        CHECK(now < last);
        last = now;
    }
}

TEST_CASE("calibrator gradient matches finite differences")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed + 50);
        CalibratorMlp f(1, 3, 1.0, seed, 6);
        Vector theta = f.parameters();
        for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) += normal(rng, 0.0, 0.5);
        f.set_parameters(theta);
        std::vector<CalibrationSample> batch;
        for (int k = 0; k < 5; ++k)
            batch.push_back(sample(testing::random_distribution(rng, 3), bernoulli(rng, 0.5) ? 1.0 : 0.0));
        auto probe = f;
        const double err = testing::max_gradient_error(theta, f.gradient(batch), [&](const Vector& t) {
            probe.set_parameters(t);
            return probe.loss(batch);
        });
        CHECK(err < 1e-6);
    }
}

TEST_CASE("high-margin agreement and low-margin disagreement are learned")
{
    CalibratorMlp f(1, 2, 2.0, 5);
    Rng rng(5);
    for (int step = 0; step < 1000; ++step) {
        std::vector<CalibrationSample> batch;
        for (int k = 0; k < 8; ++k) {
            if (bernoulli(rng, 0.5))
                batch.push_back(sample(pv(0.99, 0.01), 0.0));
            else
                batch.push_back(sample(pv(0.51, 0.49), 1.0));
        }
        f.calibrate(batch);
    }
    CHECK(f.defer_probability(pv(0.99, 0.01)) < 0.5);
    CHECK(f.defer_probability(pv(0.51, 0.49)) > 0.5);
    CHECK(f.step_count() == 1000);
}

TEST_CASE("calibration rejects samples it must not learn from")
{
    CalibratorMlp f(2, 2);
    const auto p = pv(0.6, 0.4);
    CHECK_THROWS_AS(f.calibrate(std::vector<CalibrationSample>{{2, p, 1.0, false}}), ContractViolation);
    CHECK_THROWS_AS(f.calibrate(std::vector<CalibrationSample>{{1, p, 1.0, true}}), ContractViolation);
    CHECK_THROWS_AS(f.calibrate(std::vector<CalibrationSample>{{2, p, 0.5, true}}), ContractViolation);
    CHECK_THROWS_AS(f.calibrate(std::span<const CalibrationSample>{}), ContractViolation);
    CHECK(f.step_count() == 0);
}

TEST_CASE("calibration never touches the level model")
{
    Rng rng(3);
    SoftmaxRegression m(32, 2, 1.0);
    const std::vector<LabeledExample> train = {{testing::random_sparse(rng, 32, 4), 1}};
    m.update(train);
    const auto before = m.snapshot();
    CalibratorMlp f(1, 2);
    for (int k = 0; k < 50; ++k) {
        const auto pred = m.predict(testing::random_sparse(rng, 32, 4));
        const std::vector<CalibrationSample> batch = {make_calibration_sample(1, pred, uniform_index(rng, 2))};
        f.calibrate(batch);
    }
    CHECK(m.snapshot() == before);
}

TEST_CASE("outputs stay strictly inside (0, 1) and decide is deterministic")
{
    Rng rng(4);
    CalibratorMlp f(1, 3, 1.0, 2);
    Vector theta = f.parameters();
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) = normal(rng, 0.0, 20.0);
    f.set_parameters(theta);
    for (int k = 0; k < 200; ++k) {
        const auto p = testing::random_distribution(rng, 3);
        const double d = f.defer_probability(p);
        CHECK(d > 0.0);
        CHECK(d < 1.0);
        CHECK(decide(f, p) == decide(f, p));
    }
}

TEST_CASE("calibrator snapshots round-trip")
{
    Rng rng(8);
    CalibratorMlp f(1, 2, 1.0, 4);
    for (int k = 0; k < 10; ++k) f.calibrate(std::vector<CalibrationSample>{sample(pv(0.6, 0.4), 1.0)});
    CalibratorMlp g(1, 2, 1.0, 99);
    g.restore(f.snapshot());
    CHECK(g.parameters() == f.parameters());
    CHECK(g.step_count() == 10);
    CHECK(g.defer_probability(pv(0.7, 0.3)) == f.defer_probability(pv(0.7, 0.3)));
}
