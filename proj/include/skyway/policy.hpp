#pragma once

#include "skyway/config.hpp"

#include <atomic>
#include <memory>
#include <optional>
#include <string>

namespace skyway::cognition {

enum class Tier { Uav, Haps, Reflection };

struct PolicyRequest {
    Tier tier = Tier::Uav;
    std::string prompt;
};

// Text-in/text-out backend. complete() returns nullopt when the endpoint is
// unreachable or does not answer within the timeout.
class SemanticPolicy {
public:
    virtual ~SemanticPolicy() = default;

    std::optional<std::string> complete(const PolicyRequest& request) {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return do_complete(request);
    }
    long calls() const { return calls_.load(std::memory_order_relaxed); }
    // True if replies arrive within the calling step (scripted backends).
    virtual bool synchronous() const { return true; }

protected:
    virtual std::optional<std::string> do_complete(const PolicyRequest& request) = 0;

private:
    std::atomic<long> calls_{0};
};

// Chat-completion client for an Ollama-style /api/chat endpoint.
class HttpPolicy : public SemanticPolicy {
public:
    explicit HttpPolicy(BackendConfig cfg);
    bool synchronous() const override { return false; }

    // Request body for a single-message chat exchange.
    static Json request_body(const std::string& model, const std::string& prompt, double temperature);
    // Accepts {"message":{"content":...}} or {"choices":[{"message":{"content":...}}]}.
    static std::optional<std::string> extract_content(const std::string& body);

protected:
    std::optional<std::string> do_complete(const PolicyRequest& request) override;

private:
    BackendConfig cfg_;
    std::string scheme_host_;
    std::string path_;
};

// Deterministic scripted backend. The UAV side reads the discretized prompt;
// the HAPS side parses the per-UAV table and applies the rule controller.
class MockPolicy : public SemanticPolicy {
public:
    explicit MockPolicy(std::string uav_behaviour = "heuristic", channel::HapsConfig haps = {})
        : uav_behaviour_(std::move(uav_behaviour)), haps_(std::move(haps)) {}

protected:
    std::optional<std::string> do_complete(const PolicyRequest& request) override;

private:
    std::string uav_reply(const std::string& prompt) const;
    std::string haps_reply(const std::string& prompt) const;
    std::string reflection_reply(const std::string& prompt) const;

    std::string uav_behaviour_;
    channel::HapsConfig haps_;
};

// Backend for a mode: "mock" and "rule" give a MockPolicy, "llm" an HttpPolicy.
std::unique_ptr<SemanticPolicy> make_policy(const ScenarioConfig& cfg);

}  // namespace skyway::cognition
