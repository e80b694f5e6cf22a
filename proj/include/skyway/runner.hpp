#pragma once

#include "skyway/config.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace skyway::runner {

struct EpisodeSummary {
    std::uint64_t seed = 0;
    int num_uavs = 0;
    int steps = 0;
    // Sums over UAVs and steps; penalties as magnitudes.
    double total_r_tran = 0.0;
    double total_r_tele = 0.0;
    double total_c_safe = 0.0;
    double total_c_ho = 0.0;
    int handovers = 0;
    int forced_handovers = 0;
    double handover_probability = 0.0;  // handovers / (steps * M)
    int collision_events = 0;           // UAV-steps inside the safety distance
    double collision_rate = 0.0;        // collision_events / (steps * M)
    int capacity_violation_steps = 0;
    double capacity_violation_fraction = 0.0;
    double mean_datarate_mbps = 0.0;  // serving-link rate averaged over UAV-steps
    double total_meta_reward = 0.0;
    int llm_gates = 0;
    int haps_gates = 0;
    long backend_calls = 0;
    long off_gate_backend_calls = 0;
    std::vector<int> offload_sizes;  // one entry per meta decision
    int degradations = 0;
    double wall_clock_s = 0.0;

    // Every field except wall-clock time.
    bool same_outcome(const EpisodeSummary& other) const;
};

Json to_json(const EpisodeSummary& s);

struct RunOptions {
    std::string out_dir;  // empty: no files
    int episodes = 1;
};

// Runs cfg.seed + e for episode e; agents persist across episodes.
std::vector<EpisodeSummary> run(const ScenarioConfig& cfg, const RunOptions& options = {});
EpisodeSummary run_episode(const ScenarioConfig& cfg, const std::string& out_dir = {});

// Re-aggregates a summary (except gate/backend/meta counters) from trajectory JSONL.
EpisodeSummary summarize_trajectory(const std::string& jsonl_path);

struct SweepCell {
    std::string variant;
    int num_uavs = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    EpisodeSummary summary;
};

struct SweepOptions {
    std::vector<int> num_uavs{5, 10, 15, 20, 25, 30};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<std::string> variants{"full", "no-memory", "no-meta"};
    int workers = 1;
    std::string out_dir;
};

// Applies a named ablation variant ("full", "no-memory", "no-meta").
ScenarioConfig apply_variant(ScenarioConfig cfg, const std::string& variant);

// Cross product of variants x M x seeds; failed cells are recorded, not fatal.
std::vector<SweepCell> run_sweep(const ScenarioConfig& cfg, const SweepOptions& options);

// One row per (variant, M): mean and std over successful seeds.
void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path);

}  // namespace skyway::runner
