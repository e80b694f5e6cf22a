#include "skyway/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace nlohmann {

template <>
struct adl_serializer<Eigen::Vector3d> {
    static void to_json(json& j, const Eigen::Vector3d& v) { j = json::array({v.x(), v.y(), v.z()}); }
    static void from_json(const json& j, Eigen::Vector3d& v) {
        if (!j.is_array() || j.size() != 3) throw skyway::ConfigError("expected a 3-element array");
        v = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    }
};

}  // namespace nlohmann

namespace skyway::physics {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(UavParams, mass_kg, inertia_diag, arm_length_m, thrust_coeff,
                                                torque_coeff, drag_diag, ground_effect_coeff, prop_radius_m, rpm_min,
                                                rpm_max, gravity_mps2, min_altitude_m)
}  // namespace skyway::physics

namespace skyway::channel {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TbsConfig, position_m, tx_power_dbm, num_antennas, downtilt_rad,
                                                bandwidth_hz, carrier_hz, peak_element_gain_dbi, sidelobe_limit_db,
                                                sla_db, half_power_beamwidth_rad, sectors, quota)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(HapsConfig, position_m, total_bandwidth_hz, antenna_gain_linear,
                                                carrier_hz, rician_k_db, max_uav_tx_power_dbm, capacity_limit_bps,
                                                quota)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NoiseModel, noise_psd_dbm_per_hz)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PathLossModel, los_intercept_db, los_distance_slope,
                                                nlos_intercept_db, nlos_distance_slope_base,
                                                nlos_distance_slope_altitude, assume_los_band,
                                                los_band_min_altitude_m, los_band_max_altitude_m)
}  // namespace skyway::channel

namespace skyway {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AirspaceConfig, size_m)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TimescaleConfig, dt_s, llm_period_steps, haps_period_steps)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SensorNoiseConfig, position_m, velocity_mps, attitude_rad,
                                                angular_rate_radps, rotor_rpm)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EnvConfig, num_uavs, horizon_steps, safety_distance_m, crash_penalty,
                                                handover_cost, handover_rate_penalty, transport_weights,
                                                perception_radius_m, sensor_noise, rate_unit_bps, target_tolerance_m,
                                                count_forced_handover, initial_association, spawn_margin_m,
                                                spawn_min_altitude_m, spawn_max_altitude_m, placement_attempts,
                                                origins, targets, haps_power_fraction)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NetworkConfig, tbs, haps, noise, path_loss, normalize_fading)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DiscretizeConfig, distance_edges_m, distance_labels, sinr_edges_db,
                                                sinr_labels, load_edges, load_labels, speed_edges_mps, speed_labels,
                                                rate_edges_mbps, rate_labels, vertical_band_m, level_tilt_rad)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CognitionConfig, top_k, memory_capacity, reflection_weights,
                                                reflection_threshold, discretize, embed_speed_scale_mps)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BackendConfig, mode, url, uav_model, haps_model, temperature,
                                                timeout_ms, mock_uav_policy)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(QLearnerConfig, hidden_layers, learning_rate, discount, epsilon_start,
                                                epsilon_end, epsilon_decay_steps, replay_capacity, batch_size,
                                                target_sync_steps, warmup_transitions, learn_every_steps, adam_beta1,
                                                adam_beta2, adam_epsilon, gradient_clip)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MotionDecoderConfig, speed_levels_mps, vertical_speed_mps,
                                                speed_change_fraction, max_speed_mps, velocity_kp, velocity_kd,
                                                attitude_kp, attitude_kd, yaw_kp, yaw_kd, max_tilt_rad,
                                                max_vertical_accel_mps2)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AgentConfig, q, decoder, telecom_policy, sinr_feature_scale_db)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MetaConfig, reward_weights, reflection_threshold)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AblationConfig, memory_prompt, meta_controller)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(OutputConfig, trajectory_log, log_prompts)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScenarioConfig, seed, airspace, timescales, uav, physics_substeps,
                                                motor_time_constant_s, env, network, cognition, agent, meta, ablation,
                                                backend, output)

std::vector<channel::TbsConfig> NetworkConfig::default_tbs() {
    std::vector<channel::TbsConfig> out;
    for (double y : {250.0, 750.0}) {
        for (double x : {250.0, 750.0}) {
            channel::TbsConfig t;
            t.position_m = {x, y, 25.0};
            out.push_back(t);
        }
    }
    return out;
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) { throw ConfigError(path + ": " + why); }

void positive(double v, const std::string& path) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(path, "must be > 0");
}

void nonnegative(double v, const std::string& path) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(path, "must be >= 0");
}

void check_bins(const std::vector<double>& edges, const std::vector<std::string>& labels, const std::string& path) {
    if (labels.size() != edges.size() + 1) fail(path, "needs exactly one more label than edges");
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) fail(path, "edges must be strictly increasing");
    }
}

// Reject keys that do not exist in the defaults and scalar type mismatches.
void check_schema(const Json& input, const Json& reference, const std::string& path) {
    if (reference.is_object()) {
        if (!input.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
        for (const auto& [key, value] : input.items()) {
            const std::string child = path.empty() ? key : path + "." + key;
            if (!reference.contains(key)) fail(child, "unknown field");
            check_schema(value, reference.at(key), child);
        }
        return;
    }
    if (reference.is_number() && !input.is_number()) fail(path, "expected a number");
    if (reference.is_boolean() && !input.is_boolean()) fail(path, "expected a boolean");
    if (reference.is_string() && !input.is_string()) fail(path, "expected a string");
    if (reference.is_array() && !input.is_array()) fail(path, "expected an array");
    if (reference.is_array() && !reference.empty() && reference.front().is_object()) {
        for (std::size_t i = 0; i < input.size(); ++i) {
            check_schema(input[i], reference.front(), path + "[" + std::to_string(i) + "]");
        }
    }
}

}  // namespace

void ScenarioConfig::validate() const {
    for (int i = 0; i < 3; ++i) positive(airspace.size_m[i], "airspace.size_m");
    positive(timescales.dt_s, "timescales.dt_s");
    if (timescales.llm_period_steps < 1) fail("timescales.llm_period_steps", "must be >= 1");
    if (timescales.haps_period_steps < 1) fail("timescales.haps_period_steps", "must be >= 1");
    if (physics_substeps < 1) fail("physics_substeps", "must be >= 1");
    nonnegative(motor_time_constant_s, "motor_time_constant_s");
    try {
        uav.validate();
    } catch (const std::invalid_argument& e) {
        fail("uav", e.what());
    }

    if (env.num_uavs < 1) fail("env.num_uavs", "must be >= 1");
    if (env.horizon_steps < 1) fail("env.horizon_steps", "must be >= 1");
    positive(env.safety_distance_m, "env.safety_distance_m");
    if (!(env.crash_penalty < 0.0)) fail("env.crash_penalty", "must be < 0");
    nonnegative(env.handover_cost, "env.handover_cost");
    if (!(env.handover_rate_penalty >= 0.0 && env.handover_rate_penalty < 1.0)) {
        fail("env.handover_rate_penalty", "must lie in [0, 1)");
    }
    for (double a : env.transport_weights) nonnegative(a, "env.transport_weights");
    positive(env.perception_radius_m, "env.perception_radius_m");
    nonnegative(env.sensor_noise.position_m, "env.sensor_noise.position_m");
    nonnegative(env.sensor_noise.velocity_mps, "env.sensor_noise.velocity_mps");
    nonnegative(env.sensor_noise.attitude_rad, "env.sensor_noise.attitude_rad");
    nonnegative(env.sensor_noise.angular_rate_radps, "env.sensor_noise.angular_rate_radps");
    nonnegative(env.sensor_noise.rotor_rpm, "env.sensor_noise.rotor_rpm");
    positive(env.rate_unit_bps, "env.rate_unit_bps");
    if (env.initial_association != "strongest" && env.initial_association != "haps") {
        fail("env.initial_association", "must be \"strongest\" or \"haps\"");
    }
    if (!(env.spawn_min_altitude_m > 0.0 && env.spawn_min_altitude_m <= env.spawn_max_altitude_m &&
          env.spawn_max_altitude_m <= airspace.size_m.z())) {
        fail("env.spawn_min_altitude_m", "need 0 < min <= max <= airspace height");
    }
    if (!env.origins.empty() && static_cast<int>(env.origins.size()) != env.num_uavs) {
        fail("env.origins", "must list exactly num_uavs positions");
    }
    if (!env.targets.empty() && static_cast<int>(env.targets.size()) != env.num_uavs) {
        fail("env.targets", "must list exactly num_uavs positions");
    }
    if (!(env.haps_power_fraction >= 0.0 && env.haps_power_fraction <= 1.0)) {
        fail("env.haps_power_fraction", "must lie in [0, 1]");
    }

    if (network.tbs.empty()) fail("network.tbs", "at least one terrestrial base station is required");
    for (std::size_t b = 0; b < network.tbs.size(); ++b) {
        try {
            network.tbs[b].validate();
        } catch (const std::invalid_argument& e) {
            fail("network.tbs[" + std::to_string(b) + "]", e.what());
        }
    }
    try {
        network.haps.validate();
    } catch (const std::invalid_argument& e) {
        fail("network.haps", e.what());
    }

    if (cognition.top_k < 0) fail("cognition.top_k", "must be >= 0");
    if (cognition.memory_capacity < 1) fail("cognition.memory_capacity", "must be >= 1");
    const auto& d = cognition.discretize;
    check_bins(d.distance_edges_m, d.distance_labels, "cognition.discretize.distance");
    check_bins(d.sinr_edges_db, d.sinr_labels, "cognition.discretize.sinr");
    check_bins(d.load_edges, d.load_labels, "cognition.discretize.load");
    check_bins(d.speed_edges_mps, d.speed_labels, "cognition.discretize.speed");
    check_bins(d.rate_edges_mbps, d.rate_labels, "cognition.discretize.rate");

    if (backend.mode != "rule" && backend.mode != "mock" && backend.mode != "llm") {
        fail("backend.mode", "must be rule, mock or llm");
    }
    if (backend.timeout_ms < 1) fail("backend.timeout_ms", "must be >= 1");

    const auto& q = agent.q;
    if (q.hidden_layers.empty()) fail("agent.q.hidden_layers", "needs at least one layer");
    for (int h : q.hidden_layers) {
        if (h < 1) fail("agent.q.hidden_layers", "layer sizes must be >= 1");
    }
    positive(q.learning_rate, "agent.q.learning_rate");
    if (!(q.discount >= 0.0 && q.discount < 1.0)) fail("agent.q.discount", "must lie in [0, 1)");
    if (!(q.epsilon_end >= 0.0 && q.epsilon_end <= q.epsilon_start && q.epsilon_start <= 1.0)) {
        fail("agent.q.epsilon_start", "need 0 <= epsilon_end <= epsilon_start <= 1");
    }
    if (q.batch_size < 1) fail("agent.q.batch_size", "must be >= 1");
    if (q.replay_capacity < q.batch_size) fail("agent.q.replay_capacity", "must be >= batch_size");
    if (q.target_sync_steps < 1) fail("agent.q.target_sync_steps", "must be >= 1");
    if (q.learn_every_steps < 1) fail("agent.q.learn_every_steps", "must be >= 1");
    const std::string& tp = agent.telecom_policy;
    if (tp != "ddqn" && tp != "greedy_haps" && tp != "stay") {
        fail("agent.telecom_policy", "must be ddqn, greedy_haps or stay");
    }
    positive(agent.decoder.max_speed_mps, "agent.decoder.max_speed_mps");
    positive(agent.decoder.max_tilt_rad, "agent.decoder.max_tilt_rad");

    for (double eta : meta.reward_weights) nonnegative(eta, "meta.reward_weights");
}

Json to_json(const ScenarioConfig& cfg) {
    Json j = cfg;
    return j;
}

ScenarioConfig scenario_from_json(const Json& j) {
    check_schema(j, to_json(ScenarioConfig{}), "");
    ScenarioConfig cfg;
    try {
        cfg = j.get<ScenarioConfig>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("<config>: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    Json j;
    try {
        j = Json::parse(in, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return scenario_from_json(j);
}

void save_config(const ScenarioConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError(path + ": cannot write config file");
    out << to_json(cfg).dump(2) << '\n';
}

Json apply_overrides(Json doc, const std::vector<std::string>& overrides) {
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError(item + ": override must look like key=value");
        const std::string key = item.substr(0, eq);
        const std::string raw = item.substr(eq + 1);
        Json value;
        try {
            value = Json::parse(raw);
        } catch (const Json::parse_error&) {
            value = raw;
        }
        std::string pointer;
        std::stringstream ss(key);
        std::string part;
        while (std::getline(ss, part, '.')) pointer += "/" + part;
        doc[Json::json_pointer(pointer)] = value;
    }
    return doc;
}

}  // namespace skyway
