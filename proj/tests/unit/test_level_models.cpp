#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "cascade/errors.hpp"
#include "cascade/level_models.hpp"
#include "cascade/math.hpp"
#include "cascade/snapshot.hpp"
#include "test_support.hpp"

using namespace cascade;
using testing::random_sparse;

namespace {

std::vector<LabeledExample> random_batch(Rng& rng, std::size_t dim, std::size_t labels, std::size_t n)
{
    std::vector<LabeledExample> batch;
    for (std::size_t k = 0; k < n; ++k)
        batch.push_back({random_sparse(rng, dim, 1 + uniform_index(rng, dim)), uniform_index(rng, labels)});
    return batch;
}

// Two clusters in a 16-dim space: label 0 lives on features 0..7, label 1 on 8..15.
LabeledExample cluster_sample(Rng& rng, std::size_t label)
{
    HashedFeatureVector x(16);
    const Eigen::Index base = label == 0 ? 0 : 8;
    for (Eigen::Index k = 0; k < 8; ++k) x.insertBack(base + k) = 0.5 + 0.5 * uniform01(rng);
    x /= x.norm();
    return {x, label};
}

double mean_loss(const LevelModel& m, const std::vector<LabeledExample>& batch)
{
    return m.loss(batch);
}

} // namespace

TEST_CASE("learning rate schedule")
{
    CHECK(learning_rate(1.0, 1) == 1.0);
    CHECK(learning_rate(1.0, 4) == 0.5);
    CHECK(learning_rate(1.0, 100) == doctest::Approx(0.1));
    CHECK(learning_rate(3.0, 9) == doctest::Approx(1.0));
    CHECK_THROWS_AS(learning_rate(1.0, 0), ContractViolation);
}

TEST_CASE("zero-initialized softmax regression predicts uniform")
{
    Rng rng(1);
    SoftmaxRegression two(32, 2);
    const auto p = two.predict(random_sparse(rng, 32, 5));
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);
    SoftmaxRegression seven(32, 7);
    const auto q = seven.predict(random_sparse(rng, 32, 5));
    for (std::size_t i = 0; i < 7; ++i) CHECK(q[i] == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("dimension mismatch is a contract violation")
{
    Rng rng(1);
    SoftmaxRegression m(32, 2);
    CHECK_THROWS_AS(m.predict(random_sparse(rng, 16, 3)), ContractViolation);
    Mlp mlp(32, 2, 8);
    CHECK_THROWS_AS(mlp.predict(random_sparse(rng, 16, 3)), ContractViolation);
    std::vector<LabeledExample> bad_label = {{random_sparse(rng, 32, 3), 5}};
    CHECK_THROWS_AS(m.update(bad_label), ContractViolation);
    CHECK_THROWS_AS(m.update(std::span<const LabeledExample>{}), ContractViolation);
}

TEST_CASE("softmax regression gradient matches finite differences")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        SoftmaxRegression m(5, 3);
        Vector theta(parameter_count(m));
        for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) = normal(rng, 0.0, 0.5);
        m.set_parameters(theta);
        const auto batch = random_batch(rng, 5, 3, 4);
        auto probe = m;
        const double err = testing::max_gradient_error(theta, m.gradient(batch), [&](const Vector& t) {
            probe.set_parameters(t);
            return probe.loss(batch);
        });
        CHECK(err < 1e-6);
    }
}

TEST_CASE("mlp gradient matches finite differences")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed + 100);
        Mlp m(5, 3, 4, 1.0, seed);
        Vector theta = m.parameters();
        for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) += normal(rng, 0.0, 0.3);
        m.set_parameters(theta);
        const auto batch = random_batch(rng, 5, 3, 4);
        auto probe = m;
        const double err = testing::max_gradient_error(theta, m.gradient(batch), [&](const Vector& t) {
            probe.set_parameters(t);
            return probe.loss(batch);
        });
        CHECK(err < 1e-6);
    }
}

TEST_CASE("update applies exactly one gradient step at the scheduled rate")
{
    Rng rng(4);
    SoftmaxRegression m(6, 3, 0.7);
    const auto batch = random_batch(rng, 6, 3, 3);
    m.update(batch); // step 1
    const Vector before = m.parameters();
    const Vector g = m.gradient(batch);
    m.update(batch); // step 2
    CHECK(m.step_count() == 2);
    const Vector expected = before - learning_rate(0.7, 2) * g;
    CHECK((m.parameters() - expected).cwiseAbs().maxCoeff() < 1e-12);

    Mlp mlp(6, 3, 5, 0.3, 9);
    const Vector p0 = mlp.parameters();
    const Vector g0 = mlp.gradient(batch);
    mlp.update(batch);
    CHECK((mlp.parameters() - (p0 - 0.3 * g0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("repeating one sample raises its probability monotonically")
{
    Rng rng(2);
    const LabeledExample ex{random_sparse(rng, 64, 6), 1};
    const std::vector<LabeledExample> one = {ex};

    SoftmaxRegression sm(64, 3, 1.0);
    Mlp mlp(64, 3, 16, 0.5, 3);
    for (LevelModel* m : std::initializer_list<LevelModel*>{&sm, &mlp}) {
        double last = m->predict(ex.features)[1];
        for (int k = 0; k < 100; ++k) {
            m->update(one);
            const double now = m->predict(ex.features)[1];
            CHECK(now > last);
            last = now;
        }
    }
}

TEST_CASE("saturated prediction barely moves the parameters")
{
    HashedFeatureVector x(4);
    x.insertBack(0) = 1.0;
    SoftmaxRegression m(4, 2, 1.0);
    Vector theta = Vector::Zero(parameter_count(m));
    theta(0) = 40.0; // W(0,0): label 0 logit for feature 0
    theta(1) = -40.0;
    m.set_parameters(theta);
    const std::vector<LabeledExample> batch = {{x, 0}};
    m.update(batch);
    CHECK((m.parameters() - theta).norm() < 1e-9);
}

TEST_CASE("trained models separate two clusters and reduce held-out loss")
{
    Rng rng(6);
    std::vector<LabeledExample> holdout;
    for (int k = 0; k < 100; ++k) holdout.push_back(cluster_sample(rng, uniform_index(rng, 2)));

    SoftmaxRegression sm(16, 2, 1.0);
    Mlp mlp(16, 2, 8, 0.5, 4);
    for (LevelModel* m : std::initializer_list<LevelModel*>{&sm, &mlp}) {
        const double start = mean_loss(*m, holdout);
        double prev = start;
        int upticks = 0;
        for (int step = 0; step < 500; ++step) {
            std::vector<LabeledExample> batch;
            for (int b = 0; b < 4; ++b) batch.push_back(cluster_sample(rng, uniform_index(rng, 2)));
            m->update(batch);
            const double now = mean_loss(*m, holdout);
            if (now > prev) {
                ++upticks;
                CHECK(now <= prev * 1.05);
            }
            prev = now;
        }
        CHECK(prev < start);
        CHECK(upticks <= 25);

        for (std::size_t label = 0; label < 2; ++label) {
            HashedFeatureVector centroid(16);
            for (Eigen::Index k = 0; k < 8; ++k) centroid.insertBack((label == 0 ? 0 : 8) + k) = 1.0 / std::sqrt(8.0);
            CHECK(m->predict(centroid).argmax() == label);
        }
    }
}

TEST_CASE("predict never mutates and always returns a distribution")
{
    Rng rng(12);
    Mlp m(128, 4, 16, 1.0, 2);
    const Vector before = m.parameters();
    for (int k = 0; k < 50; ++k) {
        const auto p = m.predict(random_sparse(rng, 128, 10));
        CHECK(p.values().sum() == doctest::Approx(1.0));
        CHECK(p.values().minCoeff() >= 0.0);
    }
    CHECK(m.parameters() == before);
}

TEST_CASE("updates are deterministic given seed and batches")
{
    Rng a(9), b(9);
    Mlp m1(64, 3, 8, 0.5, 42), m2(64, 3, 8, 0.5, 42);
    for (int k = 0; k < 20; ++k) {
        m1.update(random_batch(a, 64, 3, 4));
        m2.update(random_batch(b, 64, 3, 4));
    }
    CHECK(m1.parameters() == m2.parameters());
    CHECK(Mlp(64, 3, 8, 0.5, 42).parameters() != Mlp(64, 3, 8, 0.5, 43).parameters());
}

TEST_CASE("non-finite gradients abort the update without side effects")
{
    HashedFeatureVector x(8);
    x.insertBack(2) = std::numeric_limits<double>::quiet_NaN();
    const std::vector<LabeledExample> batch = {{x, 0}};
    SoftmaxRegression sm(8, 2);
    const Vector before = sm.parameters();
    CHECK_THROWS_AS(sm.update(batch), NumericFailure);
    CHECK(sm.parameters() == before);
    CHECK(sm.step_count() == 0);

    Mlp mlp(8, 2, 4);
    const Vector mbefore = mlp.parameters();
    CHECK_THROWS_AS(mlp.update(batch), NumericFailure);
    CHECK(mlp.parameters() == mbefore);
}

TEST_CASE("snapshots round-trip through bytes")
{
    Rng rng(13);
    Mlp m(32, 3, 8, 0.5, 7);
    for (int k = 0; k < 5; ++k) m.update(random_batch(rng, 32, 3, 2));
    const auto snap = m.snapshot();
    CHECK(snap.kind == ModelKind::Mlp);
    CHECK(snap.step_count == 5);
    const auto decoded = from_bytes(to_bytes(snap));
    CHECK(decoded == snap);

    Mlp other(32, 3, 8, 0.5, 99);
    other.restore(decoded);
    CHECK(other.parameters() == m.parameters());
    CHECK(other.step_count() == 5);

    SoftmaxRegression sm(32, 3);
    CHECK_THROWS(sm.restore(decoded));

    std::string bytes = to_bytes(snap);
    CHECK(bytes.substr(0, 4) == "CSNP");
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_AS(from_bytes(bytes), ParseError);
}

TEST_CASE("snapshot wire format is little-endian and self-describing")
{
    ParameterSnapshot s;
    s.kind = ModelKind::SoftmaxRegression;
    s.dims = {2, 3};
    s.step_count = 1;
    s.params = {1.0};
    const std::string b = to_bytes(s);
    // magic, version, kind, ndims, dims, step, count, one double
    CHECK(b.size() == 4 + 4 + 4 + 4 + 16 + 8 + 8 + 8);
    CHECK(static_cast<unsigned char>(b[4]) == 1);
    CHECK(static_cast<unsigned char>(b[8]) == 1);
    CHECK(static_cast<unsigned char>(b[12]) == 2);
    CHECK(static_cast<unsigned char>(b[b.size() - 1]) == 0x3f);
    CHECK(static_cast<unsigned char>(b[b.size() - 2]) == 0xf0);
}
