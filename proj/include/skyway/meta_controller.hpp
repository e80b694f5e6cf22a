#pragma once

#include "skyway/cognition.hpp"
#include "skyway/config.hpp"
#include "skyway/env.hpp"

#include <string>
#include <vector>

namespace skyway::meta {

struct UavEntry {
    int id = -1;
    bool on_haps = false;
    bool offloaded = false;
    double weighted_rate_bps = 0.0;
    double full_band_snr = 0.0;
};

struct Snapshot {
    double load_bps = 0.0;
    double capacity_bps = 0.0;
    int quota = 0;
    std::vector<UavEntry> uavs;

    int num_haps_users() const;
};

Snapshot snapshot_from(const env::HapsObservation& obs);

// Offload / Recall / Idle by the capacity and quota rules.
env::MetaAction rule_decide(const Snapshot& s, const channel::HapsConfig& haps);

// Empty string if the action may be applied, else the reason it is rejected.
std::string validate(const env::MetaAction& action, const Snapshot& s, const channel::HapsConfig& haps);

// eta_1 * sum WR - eta_2 * 1(load > C_max) - eta_3 * #handovers, WR in rate units.
double meta_reward(const env::WorldState& world_after, const ScenarioConfig& cfg);

struct MetaDecision {
    env::MetaAction action;
    bool from_policy = false;
    bool degraded = false;
    std::string reason;
    std::string prompt;
    std::string reply;
};

class MetaController {
public:
    // policy may be null in rule mode.
    MetaController(const ScenarioConfig& cfg, cognition::SemanticPolicy* policy, bool use_policy);

    MetaDecision decide(const env::HapsObservation& obs);
    // Memory update for the previous decision; reward is the mean meta reward over its interval.
    void observe(const env::HapsObservation& before, const env::MetaAction& action, double reward,
                 const env::HapsObservation& after);

    const cognition::MemoryBuffer& memory() const { return memory_; }
    bool use_policy() const { return use_policy_; }

private:
    ScenarioConfig cfg_;
    cognition::SemanticPolicy* policy_;
    bool use_policy_;
    cognition::Embedder embedder_;
    cognition::MemoryBuffer memory_;
};

}  // namespace skyway::meta
