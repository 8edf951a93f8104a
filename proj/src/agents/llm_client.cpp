#include "kf/agents/llm_client.hpp"

#include "kf/error.hpp"
#include "kf/fsutil.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

namespace kf {

using nlohmann::json;

ScriptedClient::ScriptedClient(std::vector<std::string> responses) : responses_(std::move(responses)) {}

std::unique_ptr<ScriptedClient> ScriptedClient::from_file(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const Error& e) {
        fail(ErrorCode::ClientError, "transcript unreadable: " + e.detail());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ClientError, "transcript " + path.string() + ": " + e.what());
    }
    if (j.is_object() && j.contains("responses")) j = j["responses"];
    if (!j.is_array()) fail(ErrorCode::ClientError, "transcript " + path.string() + " must be a list of responses");
    std::vector<std::string> responses;
    for (const auto& r : j) {
        if (!r.is_string()) fail(ErrorCode::ClientError, "transcript " + path.string() + ": responses must be strings");
        responses.push_back(r.get<std::string>());
    }
    return std::make_unique<ScriptedClient>(std::move(responses));
}

std::string ScriptedClient::complete(const std::string& prompt) {
    std::lock_guard lk(mu_);
    std::size_t k = prompts_.size();
    prompts_.push_back(prompt);
    if (k >= responses_.size())
        fail(ErrorCode::ClientError, "scripted transcript exhausted after " + std::to_string(responses_.size()) +
                                         " responses");
    return responses_[k];
}

std::size_t ScriptedClient::calls() const {
    std::lock_guard lk(mu_);
    return prompts_.size();
}

std::vector<std::string> ScriptedClient::prompts() const {
    std::lock_guard lk(mu_);
    return prompts_;
}

EndpointParts split_endpoint(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) fail(ErrorCode::InvalidArgument, "endpoint needs a scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

HttpClient::HttpClient(std::string endpoint, std::string api_key, std::string model, double timeout_s)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), model_(std::move(model)), timeout_s_(timeout_s) {}

HttpClient HttpClient::from_env() {
    const char* ep = std::getenv("KF_LLM_ENDPOINT");
    if (!ep || !*ep) fail(ErrorCode::ClientError, "KF_LLM_ENDPOINT is not set");
    const char* key = std::getenv("KF_LLM_API_KEY");
    const char* model = std::getenv("KF_LLM_MODEL");
    return HttpClient(ep, key ? key : "", model && *model ? model : "default");
}

std::string HttpClient::complete(const std::string& prompt) {
    EndpointParts parts = split_endpoint(endpoint_);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (parts.scheme_host_port.rfind("https://", 0) == 0)
        fail(ErrorCode::ClientError, "built without TLS support; cannot reach " + endpoint_);
#endif
    httplib::Client cli(parts.scheme_host_port);
    auto t = std::chrono::duration<double>(timeout_s_);
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(t));
    cli.set_write_timeout(std::chrono::seconds(60));
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    json body = {{"model", model_}, {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
    auto res = cli.Post(parts.path, headers, body.dump(), "application/json");
    if (!res) fail(ErrorCode::ClientError, "request to " + endpoint_ + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        fail(ErrorCode::ClientError, "endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
    try {
        json reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        fail(ErrorCode::ClientError, std::string("unexpected response shape: ") + e.what());
    }
}

}  // namespace kf
