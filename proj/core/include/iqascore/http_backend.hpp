#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "iqascore/llm.hpp"

namespace iqascore {

/// Connection settings for an OpenAI-compatible chat-completion server
/// (the protocol common inference servers speak). The API key is read
/// from the named environment variable, never stored in the file.
struct BackendConfig {
    std::string endpoint_url;    // "http://host:port" (an optional path prefix is honored)
    std::string model_name;
    std::string api_key_env_var; // empty: no Authorization header
    int max_new_tokens = 256;
    double temperature = -1.0;   // negative: leave the server default
    double request_timeout_s = 60.0;
    int max_retries = 3;
    double retry_backoff_s = 0.5; // doubled per attempt
    int parallelism = 1;
};

BackendConfig read_backend_config(std::istream& in);
BackendConfig load_backend_config(const std::filesystem::path& path);
void write_backend_config(std::ostream& out, const BackendConfig& config);

/// Chat-completion client. Transient failures (transport errors, HTTP
/// 5xx) are retried max_retries times with exponential backoff, then
/// raise BackendError; HTTP 4xx raises ConfigError immediately. Safe
/// for concurrent requests.
class HttpBackend final : public CompletionBackend {
public:
    explicit HttpBackend(BackendConfig config);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string id() const override;

    const BackendConfig& config() const { return config_; }

private:
    BackendConfig config_;
    std::string host_;  // scheme://host:port
    std::string path_;  // request path, default /v1/chat/completions
    std::string api_key_;
};

} // namespace iqascore
