#include "iqascore/http_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "iqascore/errors.hpp"

namespace iqascore {

using nlohmann::json;

namespace {

constexpr char kDefaultPath[] = "/v1/chat/completions";

} // namespace

BackendConfig read_backend_config(std::istream& in) {
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed backend config: ") + e.what());
    }
    BackendConfig config;
    try {
        config.endpoint_url = j.at("endpoint_url").get<std::string>();
        config.model_name = j.at("model_name").get<std::string>();
        config.api_key_env_var = j.value("api_key_env_var", std::string{});
        config.max_new_tokens = j.value("max_new_tokens", config.max_new_tokens);
        config.temperature = j.value("temperature", config.temperature);
        config.request_timeout_s = j.value("request_timeout_s", config.request_timeout_s);
        config.max_retries = j.value("max_retries", config.max_retries);
        config.retry_backoff_s = j.value("retry_backoff_s", config.retry_backoff_s);
        config.parallelism = j.value("parallelism", config.parallelism);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed backend config: ") + e.what());
    }
    if (config.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (config.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    return config;
}

BackendConfig load_backend_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open backend config: " + path.string());
    return read_backend_config(in);
}

void write_backend_config(std::ostream& out, const BackendConfig& config) {
    out << json{
               {"endpoint_url", config.endpoint_url},
               {"model_name", config.model_name},
               {"api_key_env_var", config.api_key_env_var},
               {"max_new_tokens", config.max_new_tokens},
               {"temperature", config.temperature},
               {"request_timeout_s", config.request_timeout_s},
               {"max_retries", config.max_retries},
               {"retry_backoff_s", config.retry_backoff_s},
               {"parallelism", config.parallelism},
           }.dump(2)
        << '\n';
}

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint_url.empty()) throw ConfigError("backend endpoint_url is empty");
    if (config_.model_name.empty()) throw ConfigError("backend model_name is empty");

    const std::size_t scheme = config_.endpoint_url.find("://");
    if (scheme == std::string::npos) {
        throw ConfigError("endpoint_url must include a scheme, e.g. http://localhost:8000");
    }
    const std::size_t slash = config_.endpoint_url.find('/', scheme + 3);
    if (slash == std::string::npos) {
        host_ = config_.endpoint_url;
        path_ = kDefaultPath;
    } else {
        host_ = config_.endpoint_url.substr(0, slash);
        const std::string prefix = config_.endpoint_url.substr(slash);
        path_ = prefix == "/" ? std::string(kDefaultPath) : prefix;
    }

    if (!config_.api_key_env_var.empty()) {
        const char* key = std::getenv(config_.api_key_env_var.c_str());
        if (key == nullptr || *key == '\0') {
            throw ConfigError("environment variable '" + config_.api_key_env_var +
                              "' named by api_key_env_var is not set");
        }
        api_key_ = key;
    }
}

std::string HttpBackend::id() const { return "http:" + config_.model_name + "@" + host_; }

CompletionResponse HttpBackend::complete(const CompletionRequest& request) {
    if (request.prompt.empty()) throw UsageError("completion request has an empty prompt");

    json body{
        {"model", config_.model_name},
        {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
    };
    const int max_tokens = request.max_new_tokens > 0 ? request.max_new_tokens : config_.max_new_tokens;
    if (max_tokens > 0) body["max_tokens"] = max_tokens;
    const double temperature = request.temperature >= 0.0 ? request.temperature : config_.temperature;
    if (temperature >= 0.0) body["temperature"] = temperature;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    const auto started = std::chrono::steady_clock::now();
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            const double backoff = config_.retry_backoff_s * static_cast<double>(1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        }

        // one client per request keeps concurrent complete() calls safe
        httplib::Client client(host_);
        const auto timeout =
            std::chrono::milliseconds(static_cast<long>(config_.request_timeout_s * 1000.0));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        httplib::Result result = client.Post(path_, headers, payload, "application/json");
        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status >= 500) {
            last_error = "HTTP " + std::to_string(result->status) + " from " + host_;
            continue;
        }
        if (result->status >= 400) {
            throw ConfigError("backend rejected the request with HTTP " +
                              std::to_string(result->status) + ": " + result->body);
        }

        json reply;
        try {
            reply = json::parse(result->body);
        } catch (const json::exception& e) {
            throw BackendError(std::string("malformed completion response: ") + e.what());
        }
        try {
            CompletionResponse response;
            response.raw_text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
            response.latency_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            response.backend_id = id();
            return response;
        } catch (const json::exception& e) {
            throw BackendError(std::string("completion response is missing choices[0].message.content: ") +
                               e.what());
        }
    }
    throw BackendError("backend unreachable after " + std::to_string(config_.max_retries + 1) +
                       " attempts: " + last_error);
}

} // namespace iqascore
