#include "skyway/meta_controller.hpp"

#include "skyway/log.hpp"

#include <algorithm>
#include <set>

namespace skyway::meta {

namespace {

std::vector<double> haps_snrs(const Snapshot& s, const std::set<int>& drop, const std::vector<int>& add) {
    std::vector<double> out;
    for (const auto& u : s.uavs) {
        if (u.on_haps && !drop.count(u.id)) out.push_back(u.full_band_snr);
    }
    for (int id : add) {
        for (const auto& u : s.uavs) {
            if (u.id == id) out.push_back(u.full_band_snr);
        }
    }
    return out;
}

const UavEntry* find(const Snapshot& s, int id) {
    for (const auto& u : s.uavs) {
        if (u.id == id) return &u;
    }
    return nullptr;
}

}  // namespace

int Snapshot::num_haps_users() const {
    return static_cast<int>(std::count_if(uavs.begin(), uavs.end(), [](const UavEntry& u) { return u.on_haps; }));
}

Snapshot snapshot_from(const env::HapsObservation& obs) {
    Snapshot s;
    s.load_bps = obs.haps_load_bps;
    s.capacity_bps = obs.capacity_limit_bps;
    s.quota = obs.quota;
    for (std::size_t m = 0; m < obs.on_haps.size(); ++m) {
        s.uavs.push_back({static_cast<int>(m), static_cast<bool>(obs.on_haps[m]), static_cast<bool>(obs.offloaded[m]),
                          obs.weighted_rate_bps[m], obs.full_band_snr[m]});
    }
    return s;
}

env::MetaAction rule_decide(const Snapshot& s, const channel::HapsConfig& haps) {
    const int n_h = s.num_haps_users();
    env::MetaAction action;

    if (s.load_bps > s.capacity_bps || n_h > s.quota) {
        std::vector<const UavEntry*> users;
        for (const auto& u : s.uavs) {
            if (u.on_haps) users.push_back(&u);
        }
        std::stable_sort(users.begin(), users.end(), [](const UavEntry* a, const UavEntry* b) {
            return a->weighted_rate_bps != b->weighted_rate_bps ? a->weighted_rate_bps < b->weighted_rate_bps
                                                                : a->id < b->id;
        });
        const int quota_excess = std::max(0, n_h - s.quota);
        // Smallest prefix whose removal brings the equal-split projection under capacity.
        int capacity_excess = 0;
        std::set<int> dropped;
        if (s.load_bps > s.capacity_bps) {
            capacity_excess = static_cast<int>(users.size());
            for (int c = 0; c <= static_cast<int>(users.size()); ++c) {
                if (c > 0) dropped.insert(users[c - 1]->id);
                const auto snrs = haps_snrs(s, dropped, {});
                if (snrs.empty() || env::equal_split_haps_load(snrs, haps) <= s.capacity_bps) {
                    capacity_excess = c;
                    break;
                }
            }
        }
        const int count = std::min<int>(std::max(quota_excess, capacity_excess), static_cast<int>(users.size()));
        if (count == 0) return action;
        action.kind = env::MetaKind::Offload;
        for (int i = 0; i < count; ++i) action.uav_ids.push_back(users[i]->id);
        return action;
    }

    std::vector<const UavEntry*> registry;
    for (const auto& u : s.uavs) {
        if (u.offloaded && !u.on_haps) registry.push_back(&u);
    }
    if (registry.empty() || n_h >= s.quota || s.load_bps >= s.capacity_bps) return action;
    std::stable_sort(registry.begin(), registry.end(), [](const UavEntry* a, const UavEntry* b) {
        return a->full_band_snr != b->full_band_snr ? a->full_band_snr > b->full_band_snr : a->id < b->id;
    });
    std::vector<int> admitted;
    for (const auto* u : registry) {
        if (n_h + static_cast<int>(admitted.size()) + 1 > s.quota) break;
        std::vector<int> trial = admitted;
        trial.push_back(u->id);
        if (env::equal_split_haps_load(haps_snrs(s, {}, trial), haps) > s.capacity_bps) break;
        admitted = std::move(trial);
    }
    if (admitted.empty()) return action;
    action.kind = env::MetaKind::Recall;
    action.uav_ids = std::move(admitted);
    return action;
}

std::string validate(const env::MetaAction& action, const Snapshot& s, const channel::HapsConfig& haps) {
    std::set<int> ids;
    for (int id : action.uav_ids) {
        if (!ids.insert(id).second) return "duplicate id " + std::to_string(id);
        if (!find(s, id)) return "unknown id " + std::to_string(id);
    }
    const int n_h = s.num_haps_users();
    switch (action.kind) {
        case env::MetaKind::Idle:
            return action.uav_ids.empty() ? "" : "Idle with ids";
        case env::MetaKind::Offload: {
            for (int id : action.uav_ids) {
                if (!find(s, id)->on_haps) return "offload of non-HAPS UAV " + std::to_string(id);
            }
            if (n_h - static_cast<int>(ids.size()) > s.quota) return "offload leaves HAPS over quota";
            return "";
        }
        case env::MetaKind::Recall: {
            for (int id : action.uav_ids) {
                const auto* u = find(s, id);
                if (!u->offloaded || u->on_haps) return "recall of UAV " + std::to_string(id) + " not in registry";
            }
            if (n_h + static_cast<int>(ids.size()) > s.quota) return "recall exceeds quota";
            if (env::equal_split_haps_load(haps_snrs(s, {}, action.uav_ids), haps) > s.capacity_bps) {
                return "recall exceeds capacity";
            }
            return "";
        }
    }
    return "unknown kind";
}

double meta_reward(const env::WorldState& world_after, const ScenarioConfig& cfg) {
    const auto& eta = cfg.meta.reward_weights;
    double wr = 0.0;
    int handovers = 0;
    for (int m = 0; m < world_after.num_uavs(); ++m) {
        wr += world_after.serving_links[m].weighted_rate_bps / cfg.env.rate_unit_bps;
        if (world_after.handover[m]) ++handovers;
    }
    const bool violation = world_after.haps_load_bps > cfg.network.haps.capacity_limit_bps;
    return eta[0] * wr - eta[1] * (violation ? 1.0 : 0.0) - eta[2] * handovers;
}

MetaController::MetaController(const ScenarioConfig& cfg, cognition::SemanticPolicy* policy, bool use_policy)
    : cfg_(cfg),
      policy_(policy),
      use_policy_(use_policy && policy != nullptr),
      embedder_(cognition::Embedder::for_haps(cfg)),
      memory_(cfg.cognition.memory_capacity) {}

MetaDecision MetaController::decide(const env::HapsObservation& obs) {
    const Snapshot snap = snapshot_from(obs);
    MetaDecision out;
    if (use_policy_) {
        const std::string dynamic = cognition::discretize(obs, cfg_.cognition.discretize);
        std::string memory_text = "none";
        if (cfg_.ablation.memory_prompt && memory_.size() > 0) {
            const auto query = embedder_.normalize(cognition::raw_features(obs));
            memory_text = cognition::render_memory(cognition::retrieve_top_k(memory_, query, cfg_.cognition.top_k));
        }
        const auto bundle = cognition::PromptBundle::compose(cognition::haps_static_prompt(), dynamic, memory_text);
        out.prompt = bundle.rendered;
        const auto d = cognition::semantic_decide_haps(*policy_, bundle);
        out.reply = d.reply;
        if (d.action) {
            const std::string why = validate(*d.action, snap, cfg_.network.haps);
            if (why.empty()) {
                out.action = *d.action;
                out.from_policy = true;
                return out;
            }
            out.reason = "invalid meta action: " + why;
        } else {
            out.reason = d.reason;
        }
        out.degraded = true;
        log::warn("meta-controller fell back to rules: " + out.reason);
    }
    out.action = rule_decide(snap, cfg_.network.haps);
    return out;
}

void MetaController::observe(const env::HapsObservation& before, const env::MetaAction& action, double reward,
                             const env::HapsObservation& after) {
    cognition::MemoryRecord r;
    r.embedding = embedder_.embed(cognition::raw_features(before));
    r.situation = cognition::discretize(before, cfg_.cognition.discretize);
    r.action = cognition::format_meta_action(action);
    r.reward = {reward};
    r.observation = {{"t", before.t}, {"load_bps", before.haps_load_bps}, {"n_H", before.num_haps_users}};
    r.next_observation = {{"t", after.t}, {"load_bps", after.haps_load_bps}, {"n_H", after.num_haps_users}};
    if (use_policy_) {
        r.correction = cognition::reflect(r.situation, r.action, r.reward, reward, cfg_.meta.reflection_threshold,
                                          *policy_)
                           .correction;
    }
    memory_.push(std::move(r));
}

}  // namespace skyway::meta
