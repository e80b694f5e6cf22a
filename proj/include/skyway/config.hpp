#pragma once

#include "skyway/channel.hpp"
#include "skyway/physics.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace skyway {

using Json = nlohmann::json;

// Invalid scenario configuration; the message carries the dotted field path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AirspaceConfig {
    Vec3 size_m{1000.0, 1000.0, 300.0};
};

struct TimescaleConfig {
    double dt_s = 0.05;
    int llm_period_steps = 20;
    int haps_period_steps = 100;
};

struct SensorNoiseConfig {
    double position_m = 0.05;
    double velocity_mps = 0.05;
    double attitude_rad = 0.01;
    double angular_rate_radps = 0.01;
    double rotor_rpm = 0.0;
};

struct EnvConfig {
    int num_uavs = 10;
    int horizon_steps = 400;
    double safety_distance_m = 5.0;
    double crash_penalty = -100.0;      // rho_crash
    double handover_cost = 1.0;         // beta
    double handover_rate_penalty = 0.2; // gamma in the weighted rate
    std::array<double, 3> transport_weights{1.0, 0.1, 0.2};  // alpha_1..3
    double perception_radius_m = 50.0;
    SensorNoiseConfig sensor_noise;
    double rate_unit_bps = 1e6;  // telecom reward unit (Mbps)
    double target_tolerance_m = 1.0;
    bool count_forced_handover = true;
    // "strongest": best SINR subject to quota; "haps": every UAV starts on the HAPS.
    std::string initial_association = "strongest";
    double spawn_margin_m = 50.0;
    double spawn_min_altitude_m = 100.0;
    double spawn_max_altitude_m = 300.0;
    int placement_attempts = 10000;
    std::vector<Vec3> origins;
    std::vector<Vec3> targets;
    double haps_power_fraction = 1.0;
};

struct NetworkConfig {
    std::vector<channel::TbsConfig> tbs = default_tbs();
    channel::HapsConfig haps;
    channel::NoiseModel noise;
    channel::PathLossModel path_loss;
    bool normalize_fading = false;

    static std::vector<channel::TbsConfig> default_tbs();
};

struct DiscretizeConfig {
    std::vector<double> distance_edges_m{10.0, 50.0, 200.0};
    std::vector<std::string> distance_labels{"VERY_CLOSE", "CLOSE", "FAR", "VERY_FAR"};
    std::vector<double> sinr_edges_db{0.0, 10.0, 20.0};
    std::vector<std::string> sinr_labels{"POOR", "FAIR", "GOOD", "EXCELLENT"};
    std::vector<double> load_edges{0.5, 0.9};
    std::vector<std::string> load_labels{"LOW", "NEAR_CAPACITY", "SATURATED"};
    std::vector<double> speed_edges_mps{0.5, 3.0, 8.0};
    std::vector<std::string> speed_labels{"STATIONARY", "SLOW", "CRUISING", "FAST"};
    std::vector<double> rate_edges_mbps{5.0, 15.0, 40.0};
    std::vector<std::string> rate_labels{"LOW", "MODERATE", "HIGH", "VERY_HIGH"};
    double vertical_band_m = 2.0;  // |dz| below this reads as "level"
    double level_tilt_rad = 0.1;
};

struct CognitionConfig {
    int top_k = 3;
    std::size_t memory_capacity = 10000;
    std::array<double, 4> reflection_weights{1.0, 1.0, 1.0, 1.0};
    double reflection_threshold = -10.0;  // rho_thresh
    DiscretizeConfig discretize;
    // Running min-max bounds seed for the embedding.
    double embed_speed_scale_mps = 15.0;
};

struct BackendConfig {
    // rule: rule-based meta tier, scripted UAV policy; mock: both tiers prompt a
    // scripted mock; llm: both tiers prompt the HTTP endpoint.
    std::string mode = "rule";
    std::string url = "http://127.0.0.1:11434/api/chat";
    std::string uav_model = "qwen3.5:9b";
    std::string haps_model = "qwen3.5:122b";
    double temperature = 0.0;
    int timeout_ms = 800;
    // Mock UAV behaviour: "heuristic" or "always:<TOKEN>".
    std::string mock_uav_policy = "heuristic";
};

struct QLearnerConfig {
    std::vector<int> hidden_layers{128, 128};
    double learning_rate = 1e-3;
    double discount = 0.99;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_decay_steps = 50000;
    std::size_t replay_capacity = 100000;
    std::size_t batch_size = 64;
    int target_sync_steps = 1000;
    std::size_t warmup_transitions = 1000;
    int learn_every_steps = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double gradient_clip = 10.0;
};

struct MotionDecoderConfig {
    std::array<double, 3> speed_levels_mps{2.0, 5.0, 10.0};  // GENTLE, NORMAL, AGGRESSIVE
    double vertical_speed_mps = 2.0;
    double speed_change_fraction = 0.25;
    double max_speed_mps = 15.0;
    double velocity_kp = 2.0;
    double velocity_kd = 0.5;
    double attitude_kp = 6.0;
    double attitude_kd = 1.5;
    double yaw_kp = 2.0;
    double yaw_kd = 1.0;
    double max_tilt_rad = 0.2094395102393195;  // 12 deg
    double max_vertical_accel_mps2 = 4.0;
};

struct AgentConfig {
    QLearnerConfig q;
    MotionDecoderConfig decoder;
    // ddqn | greedy_haps | stay
    std::string telecom_policy = "ddqn";
    // SINR features enter the Q-network as dB / scale.
    double sinr_feature_scale_db = 40.0;
};

struct MetaConfig {
    std::array<double, 3> reward_weights{1.0, 50.0, 5.0};  // eta_1..3
    double reflection_threshold = 0.0;
};

struct AblationConfig {
    bool memory_prompt = true;
    bool meta_controller = true;
};

struct OutputConfig {
    bool trajectory_log = true;
    bool log_prompts = true;
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    AirspaceConfig airspace;
    TimescaleConfig timescales;
    physics::UavParams uav;
    int physics_substeps = 10;
    double motor_time_constant_s = 0.0;
    EnvConfig env;
    NetworkConfig network;
    CognitionConfig cognition;
    AgentConfig agent;
    MetaConfig meta;
    AblationConfig ablation;
    BackendConfig backend;
    OutputConfig output;

    physics::IntegratorConfig integrator() const { return {timescales.dt_s, physics_substeps, motor_time_constant_s}; }
    int num_nodes() const { return static_cast<int>(network.tbs.size()) + 1; }
    int haps_node() const { return static_cast<int>(network.tbs.size()); }

    // Throws ConfigError("<dotted.path>: reason").
    void validate() const;
};

Json to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const Json& j);

ScenarioConfig load_config(const std::string& path);
void save_config(const ScenarioConfig& cfg, const std::string& path);

// Apply "dotted.path=value" overrides; value parsed as JSON, else taken as a string.
Json apply_overrides(Json doc, const std::vector<std::string>& overrides);

}  // namespace skyway
