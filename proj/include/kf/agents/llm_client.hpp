#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace kf {

// Text-in, text-out model access. Implementations must tolerate concurrent
// calls from several episodes. Failures throw ClientError.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

// Replays a fixed transcript: call k returns response k. Running past the end
// throws ClientError.
class ScriptedClient : public LlmClient {
public:
    explicit ScriptedClient(std::vector<std::string> responses);

    // A JSON array of strings, or {"responses": [...]}.
    static std::unique_ptr<ScriptedClient> from_file(const std::filesystem::path& path);

    std::string complete(const std::string& prompt) override;

    std::size_t calls() const;
    std::vector<std::string> prompts() const;

private:
    std::vector<std::string> responses_;
    std::vector<std::string> prompts_;
    mutable std::mutex mu_;
};

// OpenAI-style chat completions endpoint, e.g.
//   KF_LLM_ENDPOINT=https://host/v1/chat/completions  KF_LLM_API_KEY=...  KF_LLM_MODEL=...
class HttpClient : public LlmClient {
public:
    HttpClient(std::string endpoint, std::string api_key, std::string model, double timeout_s = 300.0);

    static HttpClient from_env();

    std::string complete(const std::string& prompt) override;

    const std::string& endpoint() const { return endpoint_; }

private:
    std::string endpoint_;
    std::string api_key_;
    std::string model_;
    double timeout_s_;
};

struct EndpointParts {
    std::string scheme_host_port;
    std::string path;
};

// "https://h:1/v1/x" -> {"https://h:1", "/v1/x"}. InvalidArgument without a scheme.
EndpointParts split_endpoint(const std::string& url);

}  // namespace kf
