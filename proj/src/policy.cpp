#include "skyway/policy.hpp"

#include "skyway/cognition.hpp"
#include "skyway/log.hpp"
#include "skyway/meta_controller.hpp"

#include <httplib.h>

#include <cmath>
#include <map>
#include <sstream>

namespace skyway::cognition {

namespace {

// Text between the observation and memory delimiters.
std::string observation_section(const std::string& prompt) {
    const auto begin = prompt.find(kObservationDelimiter);
    if (begin == std::string::npos) return prompt;
    const auto start = begin + kObservationDelimiter.size();
    const auto end = prompt.find(kMemoryDelimiter, start);
    return prompt.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);) out.push_back(line);
    return out;
}

// "key=value" pairs of a line; bare words are ignored.
std::map<std::string, std::string> fields_of(const std::string& line) {
    std::map<std::string, std::string> out;
    std::istringstream is(line);
    for (std::string word; is >> word;) {
        const auto eq = word.find('=');
        if (eq != std::string::npos) out[word.substr(0, eq)] = word.substr(eq + 1);
    }
    return out;
}

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

// Horizontal direction that moves toward a bearing phrase.
Directive toward(const std::string& bearing) {
    if (starts_with(bearing, "ahead")) return Directive::Forward;
    if (starts_with(bearing, "behind")) return Directive::Back;
    if (bearing == "left") return Directive::Left;
    if (bearing == "right") return Directive::Right;
    return Directive::Hover;
}

Directive away_from(const std::string& bearing, const std::string& vertical) {
    if (bearing == "overhead") return vertical == "below" ? Directive::Ascend : Directive::Descend;
    switch (toward(bearing)) {
        case Directive::Forward: return Directive::Back;
        case Directive::Back: return Directive::Forward;
        case Directive::Left: return Directive::Right;
        case Directive::Right: return Directive::Left;
        default: return Directive::Hover;
    }
}

}  // namespace

HttpPolicy::HttpPolicy(BackendConfig cfg) : cfg_(std::move(cfg)) {
    const auto scheme_end = cfg_.url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = cfg_.url.find('/', host_start);
    scheme_host_ = cfg_.url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : cfg_.url.substr(path_start);
}

Json HttpPolicy::request_body(const std::string& model, const std::string& prompt, double temperature) {
    return {{"model", model},
            {"messages", Json::array({{{"role", "user"}, {"content", prompt}}})},
            {"stream", false},
            {"options", {{"temperature", temperature}}}};
}

std::optional<std::string> HttpPolicy::extract_content(const std::string& body) {
    const Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    if (j.contains("message") && j["message"].contains("content") && j["message"]["content"].is_string()) {
        return j["message"]["content"].get<std::string>();
    }
    if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const auto& c = j["choices"][0];
        if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string()) {
            return c["message"]["content"].get<std::string>();
        }
    }
    return std::nullopt;
}

std::optional<std::string> HttpPolicy::do_complete(const PolicyRequest& request) {
    const std::string& model = request.tier == Tier::Haps ? cfg_.haps_model : cfg_.uav_model;
    httplib::Client client(scheme_host_);
    const auto ms = std::chrono::milliseconds(cfg_.timeout_ms);
    client.set_connection_timeout(ms);
    client.set_read_timeout(ms);
    client.set_write_timeout(ms);
    const auto res =
        client.Post(path_, request_body(model, request.prompt, cfg_.temperature).dump(), "application/json");
    if (!res) {
        log::warn("backend request failed: " + httplib::to_string(res.error()));
        return std::nullopt;
    }
    if (res->status != 200) {
        log::warn("backend returned HTTP " + std::to_string(res->status));
        return std::nullopt;
    }
    return extract_content(res->body);
}

std::optional<std::string> MockPolicy::do_complete(const PolicyRequest& request) {
    switch (request.tier) {
        case Tier::Uav: return uav_reply(request.prompt);
        case Tier::Haps: return haps_reply(request.prompt);
        case Tier::Reflection: return reflection_reply(request.prompt);
    }
    return std::nullopt;
}

std::string MockPolicy::uav_reply(const std::string& prompt) const {
    if (starts_with(uav_behaviour_, "always:")) {
        const std::string rest = uav_behaviour_.substr(7);
        return "DIRECTIVE " + rest;
    }
    std::map<std::string, std::string> target;
    std::vector<std::map<std::string, std::string>> neighbors;
    for (const auto& line : lines_of(observation_section(prompt))) {
        if (starts_with(line, "TARGET:")) target = fields_of(line);
        if (starts_with(line, "NEIGHBOR ")) neighbors.push_back(fields_of(line));
    }
    for (const auto& n : neighbors) {
        if (n.count("distance") && n.at("distance") == "VERY_CLOSE") {
            const Directive d = away_from(n.at("bearing"), n.at("vertical"));
            return SemanticDirective{d, Magnitude::Normal}.to_string();
        }
    }
    if (target.empty() || target["distance"] == "VERY_CLOSE") return SemanticDirective{}.to_string();
    const std::string horizontal = target["horizontal"];
    if (horizontal == "VERY_CLOSE") {
        if (target["vertical"] == "above") return SemanticDirective{Directive::Ascend, std::nullopt}.to_string();
        if (target["vertical"] == "below") return SemanticDirective{Directive::Descend, std::nullopt}.to_string();
        return SemanticDirective{}.to_string();
    }
    const Magnitude mag = horizontal == "CLOSE" ? Magnitude::Gentle
                          : horizontal == "FAR" ? Magnitude::Normal
                                                : Magnitude::Aggressive;
    return SemanticDirective{toward(target["bearing"]), mag}.to_string();
}

std::string MockPolicy::haps_reply(const std::string& prompt) const {
    meta::Snapshot s;
    for (const auto& line : lines_of(observation_section(prompt))) {
        const auto f = fields_of(line);
        if (starts_with(line, "LOAD:")) {
            s.load_bps = std::stod(f.at("load_mbps")) * 1e6;
            s.capacity_bps = std::stod(f.at("capacity_mbps")) * 1e6;
        } else if (starts_with(line, "QUOTA:")) {
            s.quota = std::stoi(f.at("Q_H"));
        } else if (starts_with(line, "UAV ")) {
            meta::UavEntry u;
            u.id = std::stoi(line.substr(4));
            u.on_haps = f.at("node") == "HAPS";
            u.offloaded = f.at("offloaded") == "yes";
            u.weighted_rate_bps = std::stod(f.at("wr_mbps")) * 1e6;
            u.full_band_snr = std::pow(10.0, std::stod(f.at("snr_db")) / 10.0);
            s.uavs.push_back(u);
        }
    }
    return format_meta_action(meta::rule_decide(s, haps_));
}

std::string MockPolicy::reflection_reply(const std::string& prompt) const {
    std::string action = "the last action";
    std::vector<double> reward;
    std::string scalar = "?";
    for (const auto& line : lines_of(prompt)) {
        if (starts_with(line, "ACTION: ")) action = line.substr(8);
        if (starts_with(line, "SCALARIZED: ")) scalar = line.substr(12);
        if (starts_with(line, "REWARD:")) {
            std::istringstream is(line.substr(7));
            for (double v; is >> v;) reward.push_back(v);
        }
    }
    std::string lesson;
    if (reward.size() == 1) {
        lesson = "The network reward was negative; offload earlier when the load nears capacity.";
    } else if (reward.size() >= 3 && reward[2] < 0.0) {
        lesson = "A neighbor came inside the safety distance; move away from the closest UAV before resuming the route.";
    } else if (reward.size() >= 4 && reward[3] < 0.0) {
        lesson = "The handover cost outweighed the link gain; stay on the serving node unless its quality drops.";
    } else {
        lesson = "Progress was poor; prefer the directive that closes the distance to the target.";
    }
    return "Correction: " + action + " scored " + scalar + ". " + lesson;
}

std::unique_ptr<SemanticPolicy> make_policy(const ScenarioConfig& cfg) {
    if (cfg.backend.mode == "llm") return std::make_unique<HttpPolicy>(cfg.backend);
    return std::make_unique<MockPolicy>(cfg.backend.mock_uav_policy, cfg.network.haps);
}

}  // namespace skyway::cognition
