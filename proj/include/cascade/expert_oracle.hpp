#ifndef CASCADE_EXPERT_ORACLE_HPP
#define CASCADE_EXPERT_ORACLE_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>

#include "cascade/core_types.hpp"
#include "cascade/random.hpp"

namespace cascade {

struct ExpertAnswer {
    std::size_t label = 0;
    ProbabilityVector one_hot;
};

/// The top-level model m_N. Its answer is treated as ground truth.
/// Every successful consult increments calls() exactly once.
class Expert {
public:
    explicit Expert(LabelSet labels) : labels_(std::move(labels)) {}
    virtual ~Expert() = default;

    ExpertAnswer consult(const StreamRecord& record);

    std::uint64_t calls() const { return calls_.load(); }
    const LabelSet& labels() const { return labels_; }

protected:
    virtual std::size_t answer(const StreamRecord& record) = 0;

    LabelSet labels_;

private:
    std::atomic<std::uint64_t> calls_{0};
};

/// Answers with the record's own label.
class DatasetOracle final : public Expert {
public:
    using Expert::Expert;

protected:
    std::size_t answer(const StreamRecord& record) override;
};

/// Dataset labels flipped to a uniformly chosen other label with probability flip_prob.
class NoisyOracle final : public Expert {
public:
    NoisyOracle(LabelSet labels, double flip_prob, std::uint64_t seed);

    std::uint64_t flips() const { return flips_.load(); }

protected:
    std::size_t answer(const StreamRecord& record) override;

private:
    double flip_prob_;
    std::mutex mutex_;
    Rng rng_;
    std::atomic<std::uint64_t> flips_{0};
};

struct RemoteExpertConfig {
    std::string url = "http://127.0.0.1:8080/classify";
    std::chrono::milliseconds timeout{30000};
    std::string prompt_template = "default";
    int retries = 2;
    int max_concurrency = 4;
};

/// JSON over HTTP POST: {"text", "labels", "template"} -> {"label"}.
/// Transport failures are retried; once the budget is spent it throws
/// ExpertUnavailable. Labels outside the label set throw ExpertProtocolError.
class RemoteExpertClient final : public Expert {
public:
    RemoteExpertClient(LabelSet labels, RemoteExpertConfig config);
    ~RemoteExpertClient() override;

    const RemoteExpertConfig& config() const { return config_; }

protected:
    std::size_t answer(const StreamRecord& record) override;

private:
    RemoteExpertConfig config_;
    std::string scheme_host_port_;
    std::string path_;
    std::counting_semaphore<1024> in_flight_;
};

/// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_url(const std::string& url);

} // namespace cascade

#endif // CASCADE_EXPERT_ORACLE_HPP
