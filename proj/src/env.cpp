#include "skyway/env.hpp"

#include "skyway/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

namespace skyway::env {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(a ^ splitmix64(purpose + 0x1000));
    const std::uint64_t c = splitmix64(b ^ splitmix64(index + 0x2000000));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    return Rng(seq);
}

TelecomCommand TelecomCommand::from_index(int index, int num_tbs) {
    if (index <= 0) return {TelecomKind::Stay, -1};
    if (index <= num_tbs) return {TelecomKind::Handover, index - 1};
    return {TelecomKind::RequestHaps, -1};
}

int TelecomCommand::index(int num_tbs) const {
    switch (kind) {
        case TelecomKind::Stay: return 0;
        case TelecomKind::Handover: return target_tbs + 1;
        case TelecomKind::RequestHaps: return num_tbs + 1;
    }
    return 0;
}

std::string TelecomCommand::to_string() const {
    switch (kind) {
        case TelecomKind::Stay: return "Stay";
        case TelecomKind::Handover: return "HO-" + std::to_string(target_tbs);
        case TelecomKind::RequestHaps: return "RequestHAPS";
    }
    return "Stay";
}

const char* to_string(MetaKind kind) {
    switch (kind) {
        case MetaKind::Idle: return "Idle";
        case MetaKind::Offload: return "Offload";
        case MetaKind::Recall: return "Recall";
    }
    return "Idle";
}

std::string MetaAction::to_string() const {
    std::ostringstream os;
    os << env::to_string(kind);
    for (int id : uav_ids) os << ' ' << id;
    return os.str();
}

Gates scheduler_gates(int t, const TimescaleConfig& cfg) {
    return {true, t % cfg.llm_period_steps == 0, t % cfg.haps_period_steps == 0};
}

double reward_transport(const Vec3& position, const Vec3& target, const Vec4& rotor_rpm, double rpm_max,
                        const Vec3& euler_rad, const std::array<double, 3>& alpha) {
    const double progress = std::exp(-(position - target).norm());
    const double effort = (rotor_rpm / rpm_max).squaredNorm();
    return alpha[0] * progress - alpha[1] * effort - alpha[2] * euler_rad.squaredNorm();
}

double reward_telecom(const channel::LinkSample& link, double rate_unit_bps) {
    return link.weighted_rate_bps / rate_unit_bps;
}

double penalty_safety(const WorldState& world, int m, double safety_distance_m, double crash_penalty) {
    const Vec3& p = world.uavs[m].position_m;
    for (int j = 0; j < world.num_uavs(); ++j) {
        if (j == m) continue;
        if ((world.uavs[j].position_m - p).norm() < safety_distance_m) return std::abs(crash_penalty);
    }
    return 0.0;
}

double penalty_handover(int previous_node, int new_node, double beta) {
    return previous_node != new_node ? beta : 0.0;
}

double equal_split_haps_load(std::span<const double> full_band_snrs, const channel::HapsConfig& cfg) {
    const double n = static_cast<double>(full_band_snrs.size());
    double load = 0.0;
    for (double s : full_band_snrs) load += cfg.total_bandwidth_hz / n * std::log2(1.0 + n * s);
    return load;
}

LocalObservation observe_local(const WorldState& world, int m, const ScenarioConfig& cfg, Rng& rng) {
    const auto& noise = cfg.env.sensor_noise;
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto jitter3 = [&](double sigma) {
        Vec3 v;
        for (int i = 0; i < 3; ++i) v[i] = sigma * gauss(rng);
        return v;
    };
    const auto& s = world.uavs[m];
    LocalObservation o;
    o.uav = m;
    o.t = world.t;
    o.position_m = s.position_m + jitter3(noise.position_m);
    o.velocity_mps = s.velocity_mps + jitter3(noise.velocity_mps);
    o.euler_rad = s.euler_rpy() + jitter3(noise.attitude_rad);
    o.angular_rate_radps = s.angular_rate_radps + jitter3(noise.angular_rate_radps);
    for (int k = 0; k < 4; ++k) o.rotor_rpm[k] = s.rotor_rpm[k] + noise.rotor_rpm * gauss(rng);
    for (int j = 0; j < world.num_uavs(); ++j) {
        if (j == m) continue;
        const Vec3 rel = world.uavs[j].position_m - s.position_m;
        if (rel.norm() > cfg.env.perception_radius_m) continue;
        Neighbor n;
        n.id = j;
        n.relative_position_m = rel + jitter3(noise.position_m);
        n.relative_velocity_mps = world.uavs[j].velocity_mps - s.velocity_mps + jitter3(noise.velocity_mps);
        o.neighbors.push_back(n);
    }
    const int haps = static_cast<int>(cfg.network.tbs.size());
    o.serving_node = world.serving[m];
    o.serving_is_haps = world.serving[m] == haps;
    o.serving_distance_m = world.serving_links[m].distance_m;
    o.serving_sinr_linear = world.serving_links[m].sinr_linear;
    o.target_m = world.targets[m];
    for (const auto& link : world.tbs_links[m]) o.node_sinr_linear.push_back(link.sinr_linear);
    o.node_sinr_linear.push_back(world.haps_full_band_snr[m]);
    return o;
}

HapsObservation observe_haps(const WorldState& world, const ScenarioConfig& cfg) {
    const int haps = static_cast<int>(cfg.network.tbs.size());
    HapsObservation o;
    o.t = world.t;
    o.haps_load_bps = world.haps_load_bps;
    o.capacity_limit_bps = cfg.network.haps.capacity_limit_bps;
    o.remaining_capacity_bps = std::max(0.0, o.capacity_limit_bps - o.haps_load_bps);
    o.quota = cfg.network.haps.quota;
    o.num_haps_users = world.node_load[haps];
    const int count = world.num_uavs();
    for (int m = 0; m < count; ++m) {
        const bool on = world.serving[m] == haps;
        o.distance_m.push_back(world.haps_links[m].distance_m);
        o.weighted_rate_bps.push_back(on ? world.serving_links[m].weighted_rate_bps : 0.0);
        o.rate_bps.push_back(on ? world.haps_links[m].rate_bps : 0.0);
        o.full_band_snr.push_back(world.haps_full_band_snr[m]);
        o.serving_node.push_back(world.serving[m]);
        o.on_haps.push_back(on);
        o.offloaded.push_back(world.offloaded[m]);
    }
    return o;
}

Environment::Environment(ScenarioConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

bool Environment::done() const {
    if (world_.t >= cfg_.env.horizon_steps) return true;
    for (int m = 0; m < world_.num_uavs(); ++m) {
        if ((world_.uavs[m].position_m - world_.targets[m]).norm() >= cfg_.env.target_tolerance_m) return false;
    }
    return true;
}

void Environment::place_fleet(Rng& rng) {
    const int count = cfg_.env.num_uavs;
    const Vec3& size = cfg_.airspace.size_m;
    const double margin = std::min(cfg_.env.spawn_margin_m, 0.5 * std::min(size.x(), size.y()));
    std::uniform_real_distribution<double> ux(margin, size.x() - margin);
    std::uniform_real_distribution<double> uy(margin, size.y() - margin);
    std::uniform_real_distribution<double> uz(cfg_.env.spawn_min_altitude_m, cfg_.env.spawn_max_altitude_m);
    auto random_point = [&] { return Vec3(ux(rng), uy(rng), uz(rng)); };

    std::vector<Vec3> origins = cfg_.env.origins;
    if (origins.empty()) {
        for (int m = 0; m < count; ++m) {
            bool placed = false;
            for (int attempt = 0; attempt < cfg_.env.placement_attempts && !placed; ++attempt) {
                const Vec3 p = random_point();
                placed = std::all_of(origins.begin(), origins.end(), [&](const Vec3& q) {
                    return (p - q).norm() >= cfg_.env.safety_distance_m;
                });
                if (placed) origins.push_back(p);
            }
            if (!placed) {
                throw ConfigError("env.num_uavs: cannot place " + std::to_string(count) +
                                  " UAVs with the required safety separation");
            }
        }
    }
    std::vector<Vec3> targets = cfg_.env.targets;
    if (targets.empty()) {
        for (int m = 0; m < count; ++m) targets.push_back(random_point());
    }

    world_.uavs.assign(count, {});
    for (int m = 0; m < count; ++m) {
        auto& s = world_.uavs[m];
        s.position_m = origins[m];
        s.rotor_rpm = Vec4::Constant(physics::hover_rpm(cfg_.uav, origins[m].z()));
    }
    world_.targets = targets;
}

const WorldState& Environment::reset(std::uint64_t seed) {
    cfg_.validate();
    const int count = cfg_.env.num_uavs;
    world_ = WorldState{};
    reset_events_.clear();

    Rng placement = make_stream(seed, kPlacementStream);
    place_fleet(placement);

    fading_rngs_.clear();
    sensor_rngs_.clear();
    for (int m = 0; m < count; ++m) {
        fading_rngs_.push_back(make_stream(seed, kFadingStream, static_cast<std::uint64_t>(m)));
        sensor_rngs_.push_back(make_stream(seed, kSensorStream, static_cast<std::uint64_t>(m)));
    }
    world_.serving.assign(count, -1);
    world_.previous_serving.assign(count, -1);
    world_.node_load.assign(cfg_.num_nodes(), 0);
    world_.offloaded.assign(count, false);
    world_.last_command_rpm.resize(count);
    for (int m = 0; m < count; ++m) world_.last_command_rpm[m] = world_.uavs[m].rotor_rpm;
    world_.handover.assign(count, false);
    world_.forced_handover.assign(count, false);

    sample_fading();
    refresh_links();
    initial_association();
    world_.previous_serving = world_.serving;
    compute_rates();
    return world_;
}

void Environment::sample_fading() {
    const int count = static_cast<int>(fading_rngs_.size());
    fading_.resize(count);
    for (int m = 0; m < count; ++m) {
        fading_[m] = channel::rician_sample(cfg_.network.haps.rician_k_db, fading_rngs_[m], cfg_.network.normalize_fading);
    }
}

void Environment::refresh_links() {
    const int count = world_.num_uavs();
    std::vector<Vec3> positions(count);
    for (int m = 0; m < count; ++m) positions[m] = world_.uavs[m].position_m;
    world_.tbs_links = kernels::tbs_links_parallel(positions, cfg_.network.tbs, cfg_.network.noise,
                                                   cfg_.network.path_loss);
    world_.haps_links.assign(count, {});
    world_.haps_full_band_snr.assign(count, 0.0);
    const auto& haps = cfg_.network.haps;
    for (int m = 0; m < count; ++m) {
        auto& link = world_.haps_links[m];
        link.node = haps_node();
        link.distance_m = (positions[m] - haps.position_m).norm();
        const Vec3 delta = positions[m] - haps.position_m;
        link.azimuth_rad = std::atan2(delta.y(), delta.x());
        link.elevation_rad = std::atan2(-delta.z(), std::hypot(delta.x(), delta.y()));
        link.gain_linear = channel::haps_channel_gain(link.distance_m, fading_[m], haps);
        link.los_prob = 1.0;
        world_.haps_full_band_snr[m] =
            cfg_.env.haps_power_fraction * channel::haps_full_band_snr(link.gain_linear, haps, cfg_.network.noise);
    }
}

void Environment::compute_rates() {
    const int count = world_.num_uavs();
    const int haps = haps_node();
    const auto& hcfg = cfg_.network.haps;
    const int users = world_.node_load[haps];
    const double noise_psd = channel::dbm_to_mw(cfg_.network.noise.noise_psd_dbm_per_hz);
    world_.haps_load_bps = 0.0;
    for (int m = 0; m < count; ++m) {
        auto& link = world_.haps_links[m];
        const bool on = world_.serving[m] == haps;
        const double share = 1.0 / std::max(1, on ? users : users + 1);
        const double signal = cfg_.env.haps_power_fraction * channel::dbm_to_mw(hcfg.max_uav_tx_power_dbm) * link.gain_linear;
        link.sinr_linear = signal / (share * hcfg.total_bandwidth_hz * noise_psd);
        link.rate_bps = on ? channel::haps_rate(share, cfg_.env.haps_power_fraction, link.gain_linear, hcfg,
                                                cfg_.network.noise)
                           : 0.0;
        if (on) world_.haps_load_bps += link.rate_bps;
    }
    world_.serving_links.assign(count, {});
    for (int m = 0; m < count; ++m) {
        const int node = world_.serving[m];
        const bool ho = world_.serving[m] != world_.previous_serving[m];
        world_.handover[m] = ho;
        channel::LinkSample link;
        int quota = 0;
        if (node == haps) {
            link = world_.haps_links[m];
            quota = hcfg.quota;
        } else {
            link = world_.tbs_links[m][node];
            quota = cfg_.network.tbs[node].quota;
        }
        link.weighted_rate_bps =
            channel::weighted_rate(link.rate_bps, quota, world_.node_load[node], ho, cfg_.env.handover_rate_penalty);
        world_.serving_links[m] = link;
    }
}

bool Environment::move(int m, int node) {
    const int old = world_.serving[m];
    if (old == node) return false;
    if (old >= 0) --world_.node_load[old];
    world_.serving[m] = node;
    ++world_.node_load[node];
    return true;
}

int Environment::least_loaded_tbs(bool require_room) const {
    int best = -1;
    for (int b = 0; b < num_tbs(); ++b) {
        if (require_room && world_.node_load[b] >= cfg_.network.tbs[b].quota) continue;
        if (best < 0 || world_.node_load[b] < world_.node_load[best]) best = b;
    }
    return best;
}

bool Environment::haps_admits(int m) const {
    if (!haps_gating()) return true;
    if (world_.offloaded[m]) return false;
    const int haps = haps_node();
    if (world_.node_load[haps] >= cfg_.network.haps.quota) return false;
    std::vector<double> snrs;
    for (int j = 0; j < world_.num_uavs(); ++j) {
        if (world_.serving[j] == haps) snrs.push_back(world_.haps_full_band_snr[j]);
    }
    snrs.push_back(world_.haps_full_band_snr[m]);
    return equal_split_haps_load(snrs, cfg_.network.haps) <= cfg_.network.haps.capacity_limit_bps;
}

void Environment::initial_association() {
    const int count = world_.num_uavs();
    const int haps = haps_node();
    if (cfg_.env.initial_association == "haps") {
        for (int m = 0; m < count; ++m) move(m, haps);
        if (world_.node_load[haps] > cfg_.network.haps.quota) {
            reset_events_.push_back({0, "scripted_haps_overload", -1, -1, haps,
                                     std::to_string(world_.node_load[haps]) + " UAVs placed on HAPS"});
        }
        return;
    }
    for (int m = 0; m < count; ++m) {
        std::vector<std::pair<double, int>> ranked;
        for (int b = 0; b < num_tbs(); ++b) ranked.emplace_back(world_.tbs_links[m][b].sinr_linear, b);
        ranked.emplace_back(world_.haps_full_band_snr[m], haps);
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        bool placed = false;
        for (const auto& [sinr, node] : ranked) {
            const bool room = node == haps ? haps_admits(m)
                                           : world_.node_load[node] < cfg_.network.tbs[node].quota;
            if (room) {
                move(m, node);
                placed = true;
                break;
            }
        }
        if (!placed) {
            const int b = least_loaded_tbs(false);
            move(m, b);
            reset_events_.push_back({0, "quota_overflow", m, -1, b, "no node with free quota"});
        }
    }
}

void Environment::apply_directive(const MetaAction& directive, std::vector<Event>& events) {
    const int haps = haps_node();
    const int t = world_.t;
    switch (directive.kind) {
        case MetaKind::Idle:
            return;
        case MetaKind::Offload:
            for (int m : directive.uav_ids) {
                if (m < 0 || m >= world_.num_uavs() || world_.serving[m] != haps) {
                    events.push_back({t, "directive_rejected", m, -1, -1, "offload target not on HAPS"});
                    continue;
                }
                int b = least_loaded_tbs(true);
                if (b < 0) {
                    b = least_loaded_tbs(false);
                    events.push_back({t, "quota_overflow", m, haps, b, "offload with every TBS at quota"});
                }
                move(m, b);
                world_.offloaded[m] = true;
                world_.forced_handover[m] = true;
                events.push_back({t, "forced_offload", m, haps, b, ""});
            }
            return;
        case MetaKind::Recall:
            for (int m : directive.uav_ids) {
                if (m < 0 || m >= world_.num_uavs() || !world_.offloaded[m] || world_.serving[m] == haps) {
                    events.push_back({t, "directive_rejected", m, -1, -1, "recall target not offloaded"});
                    continue;
                }
                std::vector<double> snrs;
                for (int j = 0; j < world_.num_uavs(); ++j) {
                    if (world_.serving[j] == haps) snrs.push_back(world_.haps_full_band_snr[j]);
                }
                snrs.push_back(world_.haps_full_band_snr[m]);
                const bool quota_ok = world_.node_load[haps] < cfg_.network.haps.quota;
                const bool capacity_ok =
                    equal_split_haps_load(snrs, cfg_.network.haps) <= cfg_.network.haps.capacity_limit_bps;
                if (!quota_ok || !capacity_ok) {
                    events.push_back({t, "recall_rejected", m, world_.serving[m], haps,
                                      quota_ok ? "capacity" : "quota"});
                    continue;
                }
                const int from = world_.serving[m];
                move(m, haps);
                world_.offloaded[m] = false;
                world_.forced_handover[m] = true;
                events.push_back({t, "recall", m, from, haps, ""});
            }
            return;
    }
}

void Environment::apply_telecom(int m, const TelecomCommand& cmd, std::vector<Event>& events) {
    const int haps = haps_node();
    const int t = world_.t;
    switch (cmd.kind) {
        case TelecomKind::Stay:
            return;
        case TelecomKind::Handover: {
            const int b = cmd.target_tbs;
            if (b < 0 || b >= num_tbs()) {
                events.push_back({t, "handover_rejected", m, world_.serving[m], b, "unknown node"});
                return;
            }
            if (world_.serving[m] == b) return;
            if (world_.node_load[b] >= cfg_.network.tbs[b].quota) {
                events.push_back({t, "handover_rejected", m, world_.serving[m], b, "quota"});
                return;
            }
            move(m, b);
            return;
        }
        case TelecomKind::RequestHaps:
            if (world_.serving[m] == haps) return;
            if (!haps_admits(m)) {
                events.push_back({t, "haps_request_denied", m, world_.serving[m], haps,
                                  world_.offloaded[m] ? "offloaded" : "admission"});
                return;
            }
            move(m, haps);
            return;
    }
}

StepResult Environment::step(std::span<const JointAction> actions, std::span<const MetaAction> directives) {
    const int count = world_.num_uavs();
    if (static_cast<int>(actions.size()) != count) {
        throw std::invalid_argument("Environment::step: expected one JointAction per UAV");
    }
    StepResult result;
    world_.previous_serving = world_.serving;
    world_.forced_handover.assign(count, false);

    for (const auto& d : directives) apply_directive(d, result.events);
    for (int m = 0; m < count; ++m) apply_telecom(m, actions[m].telecom, result.events);

    std::vector<Vec4> commands(count);
    for (int m = 0; m < count; ++m) {
        commands[m] = actions[m].rotor_rpm;
        physics::clamp_rpm(commands[m], cfg_.uav);
    }
    world_.uavs = kernels::physics_step_parallel(world_.uavs, commands, cfg_.uav, cfg_.integrator());
    world_.last_command_rpm = commands;
    world_.t += 1;

    sample_fading();
    refresh_links();
    compute_rates();

    const int t = world_.t;
    result.capacity_violation = world_.haps_load_bps > cfg_.network.haps.capacity_limit_bps;
    result.rewards.resize(count);
    for (int m = 0; m < count; ++m) {
        auto& r = result.rewards[m];
        const auto& s = world_.uavs[m];
        r.r_tran = reward_transport(s.position_m, world_.targets[m], commands[m], cfg_.uav.rpm_max, s.euler_rpy(),
                                    cfg_.env.transport_weights);
        r.r_tele = reward_telecom(world_.serving_links[m], cfg_.env.rate_unit_bps);
        r.c_safe = penalty_safety(world_, m, cfg_.env.safety_distance_m, cfg_.env.crash_penalty);
        const bool counted = !world_.forced_handover[m] || cfg_.env.count_forced_handover;
        r.c_ho = counted ? penalty_handover(world_.previous_serving[m], world_.serving[m], cfg_.env.handover_cost) : 0.0;

        if (world_.handover[m]) {
            result.events.push_back({t, "handover", m, world_.previous_serving[m], world_.serving[m],
                                     world_.forced_handover[m] ? "forced" : "tactical"});
        }
        if (r.c_safe > 0.0) result.events.push_back({t, "collision", m, -1, -1, ""});
    }
    if (result.capacity_violation) {
        std::ostringstream os;
        os.precision(17);
        os << world_.haps_load_bps;
        result.events.push_back({t, "capacity_violation", -1, -1, haps_node(), os.str()});
    }
    result.done = done();
    return result;
}

LocalObservation Environment::observe_local(int m) { return env::observe_local(world_, m, cfg_, sensor_rngs_[m]); }

HapsObservation Environment::observe_haps() const { return env::observe_haps(world_, cfg_); }

}  // namespace skyway::env
