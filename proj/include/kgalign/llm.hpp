#pragma once
// Chat-completion backend. Posts {model, messages, temperature} as JSON to a
// configurable URL and reads choices[0].message.content from the reply.

#include <chrono>
#include <cstdlib>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "kgalign/annotator.hpp"
#include "kgalign/error.hpp"

namespace kgalign {

struct LlmConfig {
    std::string url = "http://localhost:8000/v1/chat/completions";
    std::string model = "gpt-3.5-turbo";
    std::string api_key_env = "KGALIGN_API_KEY";
    int retries = 3;
    std::size_t parallelism = 4;
    std::chrono::milliseconds backoff{500};  // doubled after each failed attempt
    std::chrono::seconds timeout{60};
    std::string system_prompt = "You are an expert in knowledge graph entity alignment.";

    void validate() const {
        if (retries < 0) throw ConfigError("llm retries must be >= 0");
        if (parallelism < 1) throw ConfigError("llm parallelism must be >= 1");
        split_url(url);
    }

    // scheme://host[:port] and the path, e.g. for the http client.
    static std::pair<std::string, std::string> split_url(const std::string& u) {
        const auto scheme = u.find("://");
        if (scheme == std::string::npos) throw ConfigError("llm url needs a scheme: " + u);
        const auto slash = u.find('/', scheme + 3);
        if (slash == std::string::npos) return {u, "/"};
        return {u.substr(0, slash), u.substr(slash)};
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n\"'`.");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n\"'`.");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

// Reads a reply as a 1-based candidate number, an exact candidate name, or
// NONE. Anything else yields no choice and a note.
inline Reply parse_reply(std::string_view text, const CandidateList& c, const KnowledgeGraph& target) {
    Reply r;
    const std::string s = detail::trim(text);
    if (s == "NONE" || s == "none" || s == "None") {
        r.note = "none";
        return r;
    }
    if (!s.empty() && s.find_first_not_of("0123456789") == std::string::npos && s.size() < 10) {
        const auto idx = std::stoul(s);
        if (idx >= 1 && idx <= c.candidates.size()) {
            r.chosen = c.candidates[idx - 1].target;
        } else {
            r.note = "parse failure: index out of range";
        }
        return r;
    }
    for (const auto& cand : c.candidates) {
        if (target.entity_name(cand.target) == s) {
            r.chosen = cand.target;
            return r;
        }
    }
    r.note = "parse failure";
    return r;
}

class LlmBackend : public AnnotatorBackend {
public:
    LlmBackend(LlmConfig cfg, const KgPair& pair) : cfg_(std::move(cfg)), pair_(&pair) {
        cfg_.validate();
        if (const char* key = std::getenv(cfg_.api_key_env.c_str())) key_ = key;
    }

    std::string name() const override { return "llm:" + cfg_.model; }
    std::size_t parallelism() const override { return cfg_.parallelism; }

    Reply ask(const Query& q) override {
        const auto [host, path] = LlmConfig::split_url(cfg_.url);
        httplib::Client client(host);
        client.set_read_timeout(cfg_.timeout);
        client.set_connection_timeout(cfg_.timeout);
        if (!key_.empty()) client.set_bearer_token_auth(key_);

        const nlohmann::json body = {
            {"model", cfg_.model},
            {"temperature", 0},
            {"messages", nlohmann::json::array({{{"role", "system"}, {"content", cfg_.system_prompt}},
                                                {{"role", "user"}, {"content", q.prompt}}})}};
        const std::string payload = body.dump();

        std::string cause;
        auto delay = cfg_.backoff;
        for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(delay);
                delay *= 2;
            }
            auto res = client.Post(path, payload, "application/json");
            if (!res) {
                cause = "transport: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                cause = "http status " + std::to_string(res->status);
                continue;
            }
            nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
            if (j.is_discarded()) {
                cause = "malformed response body";
                continue;
            }
            std::string content;
            try {
                content = j.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const nlohmann::json::exception&) {
                cause = "response missing choices[0].message.content";
                continue;
            }
            Reply r = parse_reply(content, *q.candidates, pair_->target);
            r.tokens_in = estimate_tokens(q.prompt);
            r.tokens_out = estimate_tokens(content);
            if (j.contains("usage") && j["usage"].is_object()) {
                const auto& u = j["usage"];
                if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_unsigned())
                    r.tokens_in = u["prompt_tokens"].get<std::size_t>();
                if (u.contains("completion_tokens") && u["completion_tokens"].is_number_unsigned())
                    r.tokens_out = u["completion_tokens"].get<std::size_t>();
            }
            return r;
        }
        throw BackendError("llm request failed after " + std::to_string(cfg_.retries + 1) + " attempts: " + cause);
    }

    // Up to `parallelism` requests in flight; replies come back in request order.
    std::vector<Reply> ask_many(std::span<const Query> qs) override {
        std::vector<Reply> out;
        for (std::size_t begin = 0; begin < qs.size(); begin += cfg_.parallelism) {
            const std::size_t end = std::min(qs.size(), begin + cfg_.parallelism);
            std::vector<std::future<Reply>> futures;
            for (std::size_t i = begin; i < end; ++i) {
                futures.push_back(std::async(std::launch::async, [this, &q = qs[i]] { return ask(q); }));
            }
            std::string failure;
            for (auto& f : futures) {
                try {
                    out.push_back(f.get());
                } catch (const BackendError& e) {
                    if (failure.empty()) failure = e.what();
                }
            }
            if (!failure.empty()) throw BackendError(failure);
        }
        return out;
    }

private:
    LlmConfig cfg_;
    const KgPair* pair_;
    std::string key_;
};

}  // namespace kgalign
