#include "cascade/expert_oracle.hpp"

#include <algorithm>

#include <httplib.h>
#include <json.hpp>

namespace cascade {

RemoteExpertClient::RemoteExpertClient(LabelSet labels, RemoteExpertConfig config)
    : Expert(std::move(labels)), config_(std::move(config)), in_flight_(std::clamp(config_.max_concurrency, 1, 1024))
{
    if (config_.max_concurrency < 1 || config_.max_concurrency > 1024)
        throw ConfigError("expert.max_concurrency must be in [1, 1024]");
    if (config_.retries < 0) throw ConfigError("expert.retries must be >= 0");
    std::tie(scheme_host_port_, path_) = split_url(config_.url);
}

RemoteExpertClient::~RemoteExpertClient() = default;

std::size_t RemoteExpertClient::answer(const StreamRecord& record)
{
    nlohmann::json request = {
        {"text", record.text},
        {"labels", labels_.names()},
        {"template", config_.prompt_template},
    };
    const std::string body = request.dump();

    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{in_flight_};

    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        auto res = client.Post(path_, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ExpertProtocolError(std::string("expert reply is not JSON: ") + e.what());
        }
        if (!reply.is_object() || !reply.contains("label") || !reply["label"].is_string())
            throw ExpertProtocolError("expert reply lacks a string 'label' field");
        const auto label = reply["label"].get<std::string>();
        if (!labels_.contains(label)) throw ExpertProtocolError("expert answered unknown label '" + label + "'");
        return labels_.index_of(label);
    }
    throw ExpertUnavailable("expert at " + config_.url + " unavailable after " +
                            std::to_string(config_.retries + 1) + " attempt(s): " + last_error);
}

} // namespace cascade
