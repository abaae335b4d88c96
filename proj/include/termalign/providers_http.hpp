#pragma once

// HTTP+JSON adapters for hosted embedding and chat-completion services.
// Kept in a separate header so fully offline builds of the pipeline (fallback
// embedder + mock adjudicator) never touch the transport stack.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <string>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "json.hpp"

#include "termalign/adjudicate.hpp"
#include "termalign/config.hpp"
#include "termalign/embedding.hpp"
#include "termalign/errors.hpp"

namespace termalign {

namespace detail {

struct SplitUrl {
    std::string base;   // scheme://host[:port]
    std::string path;   // /v1/... (defaults to "/")
};

inline SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigInvalid("endpoint must start with http:// or https://: '" + url + "'");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::string auth_token(const std::string& env_name) {
    const char* token = std::getenv(env_name.c_str());
    if (!token || !*token)
        throw ProviderError("auth environment variable '" + env_name + "' is not set");
    return token;
}

// POSTs a JSON body, retrying transport failures and 5xx/429 answers with a
// short backoff. 4xx answers fail immediately.
inline nlohmann::json post_json(httplib::Client& client, const std::string& path,
                                const httplib::Headers& headers, const nlohmann::json& body,
                                int retries, const std::string& what) {
    std::string payload = body.dump();
    for (int attempt = 0; attempt <= retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
        httplib::Result res = client.Post(path, headers, payload, "application/json");
        if (!res) continue;
        if (res->status >= 200 && res->status < 300) {
            nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
            if (parsed.is_discarded())
                throw ProviderError(what + ": response is not valid JSON");
            return parsed;
        }
        if (res->status < 500 && res->status != 429)
            throw ProviderError(what + ": HTTP " + std::to_string(res->status) + ": " +
                                res->body.substr(0, 200));
    }
    throw ProviderError(what + ": no response after " + std::to_string(retries + 1) +
                        " attempts");
}

}  // namespace detail

// Embeddings endpoint speaking the common {"model","input"} -> {"data":
// [{"embedding": [...]}]} shape.
class HttpEmbeddingProvider final : public EmbeddingProvider {
  public:
    explicit HttpEmbeddingProvider(const EmbeddingConfig& config)
        : config_(config), url_(detail::split_url(config.endpoint)),
          client_(std::make_unique<httplib::Client>(url_.base)) {
        token_ = detail::auth_token(config.auth_env);
        auto timeout = std::chrono::duration<double>(config.timeout_s);
        client_->set_connection_timeout(timeout);
        client_->set_read_timeout(timeout);
        client_->set_write_timeout(timeout);
    }

    std::string id() const override { return "http:" + config_.model; }
    std::size_t dim() const override { return config_.dim; }

    std::vector<Vector> embed(const std::vector<std::string>& texts) override {
        nlohmann::json body = {{"model", config_.model}, {"input", texts}};
        httplib::Headers headers = {{"Authorization", "Bearer " + token_}};
        nlohmann::json response = detail::post_json(*client_, url_.path, headers, body,
                                                    config_.retries, "embedding provider");
        if (!response.contains("data") || !response["data"].is_array() ||
            response["data"].size() != texts.size())
            throw ProviderError("embedding provider: expected " + std::to_string(texts.size()) +
                                " entries in 'data'");
        std::vector<Vector> out;
        out.reserve(texts.size());
        for (const auto& item : response["data"]) {
            Vector v = item.at("embedding").get<Vector>();
            if (v.size() != config_.dim)
                throw DimensionMismatch("embedding provider returned dim " +
                                        std::to_string(v.size()) + ", expected " +
                                        std::to_string(config_.dim));
            out.push_back(std::move(v));
        }
        return out;
    }

  private:
    EmbeddingConfig config_;
    detail::SplitUrl url_;
    std::unique_ptr<httplib::Client> client_;
    std::string token_;
};

// Chat-completions endpoint; the rendered prompt travels as a single user
// message. A client per call keeps concurrent in-flight requests safe
// (httplib clients are not thread-safe), and connection setup is noise next
// to completion latency.
class HttpLlmProvider final : public LlmProvider {
  public:
    explicit HttpLlmProvider(const LlmConfig& config)
        : config_(config), url_(detail::split_url(config.endpoint)) {
        token_ = detail::auth_token(config.auth_env);
    }

    std::string model_id() const override { return config_.model; }

    std::string complete(const std::string& prompt) override {
        httplib::Client client(url_.base);
        auto timeout = std::chrono::duration<double>(config_.timeout_s);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        nlohmann::json body = {
            {"model", config_.model},
            {"temperature", config_.temperature},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
        httplib::Headers headers = {{"Authorization", "Bearer " + token_}};
        nlohmann::json response =
            detail::post_json(client, url_.path, headers, body, config_.retries, "llm provider");
        try {
            return response.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw ProviderError("llm provider: response lacks choices[0].message.content");
        }
    }

  private:
    LlmConfig config_;
    detail::SplitUrl url_;
    std::string token_;
};

// --- provider factories ----------------------------------------------------------

inline std::unique_ptr<EmbeddingProvider> make_embedding_provider(const PipelineConfig& config) {
    if (config.embedding.kind == "fallback")
        return std::make_unique<FallbackEmbedder>(config.embedding.dim, config.embedding.seed);
    return std::make_unique<HttpEmbeddingProvider>(config.embedding);
}

inline std::unique_ptr<LlmProvider> make_llm_provider(const PipelineConfig& config) {
    if (config.llm.kind == "mock") {
        nlohmann::json script = nlohmann::json::object();
        if (!config.llm.script.empty()) {
            std::ifstream in(config.llm.script);
            if (!in)
                throw MissingInput("cannot open mock llm script: " + config.llm.script.string());
            in >> script;
        }
        return MockLlmProvider::from_json(script, config.llm.model);
    }
    return std::make_unique<HttpLlmProvider>(config.llm);
}

}  // namespace termalign
