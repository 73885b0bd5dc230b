#include <doctest.h>

#include <atomic>
#include <thread>

// Eigen must come before httplib: <resolv.h> defines a _res macro.
#include "cascade/errors.hpp"
#include "cascade/expert_oracle.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace cascade;

namespace {

const LabelSet kLabels({"negative", "positive"});

StreamRecord labelled(std::size_t i, const std::string& label)
{
    return make_record("r" + std::to_string(i), "text " + std::to_string(i), label);
}

// Local HTTP server on an ephemeral port, torn down at scope exit.
class TestServer {
public:
    explicit TestServer(httplib::Server::Handler handler)
    {
        server_.Post("/classify", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~TestServer()
    {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/classify"; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

RemoteExpertConfig fast_config(const std::string& url, int retries = 1)
{
    RemoteExpertConfig cfg;
    cfg.url = url;
    cfg.timeout = std::chrono::milliseconds(2000);
    cfg.retries = retries;
    return cfg;
}

} // namespace

TEST_CASE("dataset oracle returns the record label as one-hot")
{
    DatasetOracle oracle(kLabels);
    const auto a = oracle.consult(labelled(0, "positive"));
    CHECK(a.label == 1);
    CHECK(a.one_hot[1] == 1.0);
    CHECK(a.one_hot[0] == 0.0);
    CHECK(oracle.calls() == 1);
}

TEST_CASE("dataset oracle needs labels and does not count failed consults")
{
    DatasetOracle oracle(kLabels);
    CHECK_THROWS_AS(oracle.consult(make_record("x", "no label")), ConfigError);
    CHECK(oracle.calls() == 0);
}

TEST_CASE("noiseless noisy oracle agrees with the dataset oracle")
{
    DatasetOracle exact(kLabels);
    NoisyOracle noisy(kLabels, 0.0, 3);
    for (std::size_t i = 0; i < 500; ++i) {
        const auto r = labelled(i, i % 3 == 0 ? "negative" : "positive");
        CHECK(noisy.consult(r).label == exact.consult(r).label);
    }
    CHECK(noisy.flips() == 0);
}

TEST_CASE("noisy oracle flip rate stays within three sigma")
{
    NoisyOracle noisy(kLabels, 0.1, 17);
    int flipped = 0;
    for (std::size_t i = 0; i < 10000; ++i) {
        const auto r = labelled(i, i % 2 == 0 ? "negative" : "positive");
        if (noisy.consult(r).label != kLabels.index_of(*r.label)) ++flipped;
    }
    CHECK(flipped / 10000.0 >= 0.091);
    CHECK(flipped / 10000.0 <= 0.109);
    CHECK(noisy.flips() == static_cast<std::uint64_t>(flipped));
    CHECK_THROWS_AS(NoisyOracle(kLabels, 1.0, 1), ConfigError);
}

TEST_CASE("concurrent consults are each counted once")
{
    NoisyOracle noisy(kLabels, 0.2, 5);
    std::vector<std::thread> threads;
    for (int w = 0; w < 4; ++w)
        threads.emplace_back([&noisy, w] {
            for (std::size_t i = 0; i < 1000; ++i) noisy.consult(labelled(i + 1000 * w, "positive"));
        });
    for (auto& t : threads) t.join();
    CHECK(noisy.calls() == 4000);
}

TEST_CASE("url splitting")
{
    CHECK(split_url("http://h:1/a/b") == std::pair<std::string, std::string>{"http://h:1", "/a/b"});
    CHECK(split_url("http://h:1") == std::pair<std::string, std::string>{"http://h:1", "/"});
    CHECK_THROWS_AS(split_url("h:1/x"), ConfigError);
}

TEST_CASE("remote client speaks the JSON protocol")
{
    nlohmann::json seen;
    TestServer server([&seen](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        res.set_content(R"({"label": "positive"})", "application/json");
    });
    RemoteExpertClient client(kLabels, fast_config(server.url()));
    const auto a = client.consult(make_record("q", "great film"));
    CHECK(a.label == 1);
    CHECK(client.calls() == 1);
    CHECK(seen["text"] == "great film");
    CHECK(seen["labels"] == nlohmann::json::array({"negative", "positive"}));
    CHECK(seen["template"] == "default");
}

TEST_CASE("remote client rejects answers outside the label set")
{
    TestServer unknown([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"label": "maybe"})", "application/json");
    });
    RemoteExpertClient client(kLabels, fast_config(unknown.url()));
    CHECK_THROWS_AS(client.consult(make_record("q", "x")), ExpertProtocolError);
    CHECK(client.calls() == 0);

    TestServer garbage([](const httplib::Request&, httplib::Response& res) {
        res.set_content("positive", "text/plain");
    });
    RemoteExpertClient client2(kLabels, fast_config(garbage.url()));
    CHECK_THROWS_AS(client2.consult(make_record("q", "x")), ExpertProtocolError);
}

TEST_CASE("remote client retries server errors and then gives up")
{
    std::atomic<int> attempts{0};
    TestServer failing([&attempts](const httplib::Request&, httplib::Response& res) {
        ++attempts;
        res.status = 503;
    });
    RemoteExpertClient client(kLabels, fast_config(failing.url(), 2));
    CHECK_THROWS_AS(client.consult(make_record("q", "x")), ExpertUnavailable);
    CHECK(attempts.load() == 3);
    CHECK(client.calls() == 0);
}

TEST_CASE("remote client recovers when a retry succeeds")
{
    std::atomic<int> attempts{0};
    TestServer flaky([&attempts](const httplib::Request&, httplib::Response& res) {
        if (++attempts == 1) {
            res.status = 500;
            return;
        }
        res.set_content(R"({"label": "negative"})", "application/json");
    });
    RemoteExpertClient client(kLabels, fast_config(flaky.url(), 1));
    CHECK(client.consult(make_record("q", "x")).label == 0);
}

TEST_CASE("unreachable endpoint raises expert-unavailable")
{
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    RemoteExpertClient client(kLabels, fast_config("http://127.0.0.1:" + std::to_string(port) + "/classify", 0));
    CHECK_THROWS_AS(client.consult(make_record("q", "x")), ExpertUnavailable);
}

TEST_CASE("remote client config validation")
{
    RemoteExpertConfig cfg;
    cfg.max_concurrency = 0;
    CHECK_THROWS_AS(RemoteExpertClient(kLabels, cfg), ConfigError);
    cfg.max_concurrency = 2;
    cfg.retries = -1;
    CHECK_THROWS_AS(RemoteExpertClient(kLabels, cfg), ConfigError);
}
