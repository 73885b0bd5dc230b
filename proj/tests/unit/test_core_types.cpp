#include <doctest.h>

#include <cmath>

#include "cascade/core_types.hpp"
#include "cascade/errors.hpp"
#include "test_support.hpp"

using namespace cascade;

namespace {

ProbabilityVector pv(std::initializer_list<double> v)
{
    Vector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) x(i++) = d;
    return ProbabilityVector(x);
}

CostModel cost_of(double mu, std::vector<double> c)
{
    CostModel m;
    m.mu = mu;
    m.defer_penalties = std::move(c);
    return m;
}

} // namespace

TEST_CASE("label set maps names and indices both ways")
{
    LabelSet labels({"neg", "pos", "neutral"});
    CHECK(labels.size() == 3);
    for (std::size_t i = 0; i < labels.size(); ++i) CHECK(labels.index_of(labels.name(i)) == i);
    CHECK(labels.contains("pos"));
    CHECK_FALSE(labels.contains("other"));
    CHECK_THROWS_AS(labels.index_of("other"), ContractViolation);
    CHECK_THROWS_AS(LabelSet({"a", "a"}), ConfigError);
    CHECK_THROWS_AS(LabelSet({"a"}), ConfigError);
}

TEST_CASE("records count code points, not bytes")
{
    CHECK(make_record("1", "abc").length_chars == 3);
    CHECK(make_record("2", "caf\xc3\xa9").length_chars == 4);
    CHECK(make_record("3", "").length_chars == 0);
}

TEST_CASE("probability vectors validate their invariants")
{
    CHECK_NOTHROW(pv({0.25, 0.75}));
    CHECK_THROWS_AS(pv({0.5, 0.6}), ContractViolation);
    CHECK_THROWS_AS(pv({-0.1, 1.1}), ContractViolation);
    CHECK(pv({0.5, 0.5}).argmax() == 0);
    CHECK(pv({0.2, 0.4, 0.4}).argmax() == 1);
    const auto u = ProbabilityVector::uniform(7);
    for (std::size_t i = 0; i < 7; ++i) CHECK(u[i] == doctest::Approx(1.0 / 7));
    CHECK(ProbabilityVector::one_hot(3, 2)[2] == 1.0);
}

TEST_CASE("state ids and actions")
{
    CHECK(CascadeStateId::initial(4) == CascadeStateId{4, 1, false});
    CHECK(CascadeStateId::exit(4) == CascadeStateId{4, 9, true});
    CHECK_FALSE(CascadeStateId::exit(4) == CascadeStateId::initial(4));
    CHECK(Action::defer().is_defer());
    CHECK(Action::predict(1) == Action::predict(1));
}

TEST_CASE("prediction loss examples")
{
    CHECK(prediction_loss(pv({0.9, 0.1}), 0, LossKind::ZeroOne) == 0.0);
    CHECK(prediction_loss(pv({0.4, 0.6}), 0, LossKind::ZeroOne) == 1.0);
    CHECK(prediction_loss(pv({0.5, 0.5}), 1, LossKind::CrossEntropy) == doctest::Approx(std::log(2.0)));
    CHECK(prediction_loss(pv({1.0, 0.0}), 1, LossKind::CrossEntropy) == doctest::Approx(-std::log(1e-12)));
    CHECK(prediction_loss(1, 1, 2, LossKind::ZeroOne) == 0.0);
    CHECK(prediction_loss(0, 1, 2, LossKind::ZeroOne) == 1.0);
    CHECK_THROWS_AS(prediction_loss(pv({0.5, 0.5}), 2, LossKind::ZeroOne), ContractViolation);
    CHECK(parse_loss_kind(to_string(LossKind::CrossEntropy)) == LossKind::CrossEntropy);
}

TEST_CASE("immediate cost examples")
{
    const auto cost = cost_of(0.5, {2.0, 3.0});
    CHECK(immediate_cost(1.0, pv({0.3, 0.7}), 0, 1, cost) == doctest::Approx(1.0));
    CHECK(immediate_cost(0.0, pv({1.0, 0.0}), 0, 1, cost) == doctest::Approx(0.0));
    CHECK(immediate_cost(0.5, pv({0.6, 0.4}), 0, 1, cost) == doctest::Approx(0.7));
    CHECK_THROWS(immediate_cost(0.5, pv({0.6, 0.4}), 0, 3, cost));
}

TEST_CASE("immediate cost with 0-1 loss is bounded by max(1, mu c)")
{
    Rng rng(3);
    for (int k = 0; k < 500; ++k) {
        const auto cost = cost_of(uniform(rng, 0.0, 3.0), {uniform(rng, 0.1, 4.0)});
        const double d = uniform01(rng);
        const auto p = testing::random_distribution(rng, 3);
        const double c = immediate_cost(d, p, uniform_index(rng, 3), 1, cost);
        CHECK(c >= 0.0);
        CHECK(c <= std::max(1.0, cost.deferral_charge(1)) + 1e-12);
    }
}

TEST_CASE("reach probability")
{
    CHECK(reach_probability({}) == 1.0);
    const std::vector<double> a = {0.8, 0.5};
    CHECK(reach_probability(a) == doctest::Approx(0.4));
    const std::vector<double> b = {0.0, 0.9};
    CHECK(reach_probability(b) == 0.0);
    const std::vector<double> bad = {1.2};
    CHECK_THROWS_AS(reach_probability(bad), ContractViolation);

    Rng rng(5);
    std::vector<double> prefix;
    double last = 1.0;
    for (int k = 0; k < 20; ++k) {
        prefix.push_back(uniform01(rng));
        const double r = reach_probability(prefix);
        CHECK(r <= last);
        last = r;
    }
}

TEST_CASE("episode cost examples")
{
    const auto cost = cost_of(1.0, {1.0});
    EpisodeCostInputs keep{{0.0}, {pv({1.0, 0.0})}, 0, std::nullopt};
    CHECK(episode_cost(keep, cost) == 0.0);
    EpisodeCostInputs defer{{1.0}, {pv({1.0, 0.0})}, 1, std::nullopt};
    CHECK(episode_cost(defer, cost) == doctest::Approx(1.0));
}

TEST_CASE("total cost matches brute-force tree enumeration")
{
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n_inner = 1 + uniform_index(rng, 3);
        std::vector<double> penalties;
        for (std::size_t i = 0; i < n_inner; ++i) penalties.push_back(uniform(rng, 0.1, 3.0));
        const auto cost = cost_of(uniform(rng, 0.0, 2.0), penalties);
        std::vector<EpisodeCostInputs> episodes;
        for (int t = 0; t < 3; ++t) {
            EpisodeCostInputs e;
            for (std::size_t i = 0; i < n_inner; ++i) {
                e.defer_probs.push_back(uniform01(rng));
                e.level_preds.push_back(testing::random_distribution(rng, 3));
            }
            e.truth = uniform_index(rng, 3);
            if (bernoulli(rng, 0.5)) e.expert_pred = testing::random_distribution(rng, 3);
            episodes.push_back(e);
        }
        CHECK(total_cost(episodes, cost) == doctest::Approx(testing::tree_total(episodes, cost)).epsilon(1e-12));
    }
}

TEST_CASE("total cost is additive over episode partitions")
{
    Rng rng(21);
    const auto cost = cost_of(0.7, {1.0, 2.0});
    std::vector<EpisodeCostInputs> episodes;
    for (int t = 0; t < 10; ++t) {
        EpisodeCostInputs e;
        for (int i = 0; i < 2; ++i) {
            e.defer_probs.push_back(uniform01(rng));
            e.level_preds.push_back(testing::random_distribution(rng, 2));
        }
        e.truth = uniform_index(rng, 2);
        episodes.push_back(e);
    }
    const std::span<const EpisodeCostInputs> all(episodes);
    for (std::size_t k = 0; k <= episodes.size(); ++k)
        CHECK(total_cost(all, cost) ==
              doctest::Approx(total_cost(all.first(k), cost) + total_cost(all.subspan(k), cost)));
}

TEST_CASE("with free deferral and a perfect expert, always deferring reaches zero cost")
{
    Rng rng(8);
    const auto cost = cost_of(0.0, {1.0, 1.0});
    for (int k = 0; k < 100; ++k) {
        EpisodeCostInputs all_defer{{1.0, 1.0},
                                    {testing::random_distribution(rng, 2), testing::random_distribution(rng, 2)},
                                    uniform_index(rng, 2),
                                    std::nullopt};
        CHECK(episode_cost(all_defer, cost) == 0.0);
        EpisodeCostInputs other = all_defer;
        other.defer_probs = {uniform01(rng), uniform01(rng)};
        CHECK(episode_cost(other, cost) >= 0.0);
    }
}

TEST_CASE("cost model validation")
{
    CHECK_NOTHROW(cost_of(1.0, {1.0}).validate());
    CHECK_THROWS(cost_of(-1.0, {1.0}).validate());
    CHECK_THROWS(cost_of(1.0, {0.0}).validate());
    CHECK_THROWS(cost_of(1.0, {}).validate());
}
