#pragma once

#include "skyway/channel.hpp"
#include "skyway/config.hpp"
#include "skyway/physics.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace skyway::env {

using Rng = std::mt19937_64;

// Independent, order-free substream for (seed, purpose, index).
Rng make_stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0);

enum StreamPurpose : std::uint64_t {
    kPlacementStream = 1,
    kFadingStream = 2,
    kSensorStream = 3,
    kAgentStream = 4,
    kPolicyStream = 5,
};

enum class TelecomKind { Stay, Handover, RequestHaps };

// Index layout: 0 = Stay, 1..B = handover to TBS b-1, B+1 = RequestHAPS.
struct TelecomCommand {
    TelecomKind kind = TelecomKind::Stay;
    int target_tbs = -1;

    static TelecomCommand from_index(int index, int num_tbs);
    int index(int num_tbs) const;
    std::string to_string() const;
};

struct JointAction {
    Vec4 rotor_rpm = Vec4::Zero();
    TelecomCommand telecom;
};

enum class MetaKind { Idle, Offload, Recall };

struct MetaAction {
    MetaKind kind = MetaKind::Idle;
    std::vector<int> uav_ids;

    std::string to_string() const;
};

const char* to_string(MetaKind kind);

struct RewardVector {
    double r_tran = 0.0;
    double r_tele = 0.0;
    double c_safe = 0.0;  // penalty magnitude
    double c_ho = 0.0;    // penalty magnitude

    // (R_tran, R_tele, -C_safe, -C_HO).
    Eigen::Vector4d signed_vector() const { return {r_tran, r_tele, -c_safe, -c_ho}; }
    double scalarize(const std::array<double, 4>& w) const {
        return w[0] * r_tran + w[1] * r_tele - w[2] * c_safe - w[3] * c_ho;
    }
};

struct Event {
    int t = 0;
    std::string type;
    int uav = -1;
    int from = -1;
    int to = -1;
    std::string detail;
};

struct Neighbor {
    int id = -1;
    Vec3 relative_position_m = Vec3::Zero();
    Vec3 relative_velocity_mps = Vec3::Zero();
};

struct LocalObservation {
    int uav = -1;
    int t = 0;
    Vec3 position_m = Vec3::Zero();
    Vec3 velocity_mps = Vec3::Zero();
    Vec3 euler_rad = Vec3::Zero();
    Vec3 angular_rate_radps = Vec3::Zero();
    Vec4 rotor_rpm = Vec4::Zero();
    std::vector<Neighbor> neighbors;
    int serving_node = -1;
    bool serving_is_haps = false;
    double serving_distance_m = 0.0;
    double serving_sinr_linear = 0.0;
    // Mission target; known onboard.
    Vec3 target_m = Vec3::Zero();
    // Link-quality estimate per node (TBS SINR, HAPS full-band SNR), linear.
    std::vector<double> node_sinr_linear;
};

struct HapsObservation {
    int t = 0;
    double haps_load_bps = 0.0;
    double remaining_capacity_bps = 0.0;
    double capacity_limit_bps = 0.0;
    int quota = 0;
    int num_haps_users = 0;
    std::vector<double> distance_m;
    std::vector<double> weighted_rate_bps;  // zero for UAVs not on the HAPS
    std::vector<double> rate_bps;
    std::vector<double> full_band_snr;
    std::vector<int> serving_node;
    std::vector<bool> on_haps;
    std::vector<bool> offloaded;
};

struct WorldState {
    int t = 0;
    std::vector<physics::RigidBodyState> uavs;
    std::vector<Vec3> targets;
    std::vector<int> serving;
    std::vector<int> previous_serving;
    std::vector<int> node_load;  // size B+1, HAPS last
    double haps_load_bps = 0.0;
    std::vector<bool> offloaded;
    std::vector<Vec4> last_command_rpm;
    std::vector<std::vector<channel::LinkSample>> tbs_links;  // [uav][tbs]
    std::vector<channel::LinkSample> haps_links;
    std::vector<double> haps_full_band_snr;
    std::vector<channel::LinkSample> serving_links;  // with weighted rate
    std::vector<bool> handover;  // serving changed during the last step
    std::vector<bool> forced_handover;

    int num_uavs() const { return static_cast<int>(uavs.size()); }
};

struct StepResult {
    std::vector<RewardVector> rewards;
    std::vector<Event> events;
    bool capacity_violation = false;
    bool done = false;
};

struct Gates {
    bool fast = true;
    bool llm = false;
    bool haps = false;
};

Gates scheduler_gates(int t, const TimescaleConfig& cfg = {});

// Rotor command normalised by rpm_max before the norm.
double reward_transport(const Vec3& position, const Vec3& target, const Vec4& rotor_rpm, double rpm_max,
                        const Vec3& euler_rad, const std::array<double, 3>& alpha);

double reward_telecom(const channel::LinkSample& link, double rate_unit_bps = 1e6);

double penalty_safety(const WorldState& world, int m, double safety_distance_m, double crash_penalty);

double penalty_handover(int previous_node, int new_node, double beta);

LocalObservation observe_local(const WorldState& world, int m, const ScenarioConfig& cfg, Rng& rng);

HapsObservation observe_haps(const WorldState& world, const ScenarioConfig& cfg);

// Aggregate HAPS load if the given users share the band equally at full power.
double equal_split_haps_load(std::span<const double> full_band_snrs, const channel::HapsConfig& cfg);

class Environment {
public:
    explicit Environment(ScenarioConfig cfg);

    // Throws ConfigError for infeasible placement or a degenerate fleet.
    const WorldState& reset(std::uint64_t seed);

    // Apply meta directives, then telecom commands (ascending UAV id), then physics.
    StepResult step(std::span<const JointAction> actions, std::span<const MetaAction> directives = {});

    LocalObservation observe_local(int m);
    HapsObservation observe_haps() const;

    const WorldState& world() const { return world_; }
    const ScenarioConfig& config() const { return cfg_; }
    int num_tbs() const { return static_cast<int>(cfg_.network.tbs.size()); }
    int haps_node() const { return num_tbs(); }
    int num_actions() const { return num_tbs() + 2; }
    bool haps_gating() const { return cfg_.ablation.meta_controller; }
    const std::vector<Event>& reset_events() const { return reset_events_; }
    bool done() const;

private:
    void place_fleet(Rng& rng);
    void initial_association();
    void refresh_links();
    void sample_fading();
    void compute_rates();
    bool move(int m, int node);
    int least_loaded_tbs(bool require_room) const;
    bool haps_admits(int m) const;
    void apply_directive(const MetaAction& directive, std::vector<Event>& events);
    void apply_telecom(int m, const TelecomCommand& cmd, std::vector<Event>& events);

    ScenarioConfig cfg_;
    WorldState world_;
    std::vector<Rng> fading_rngs_;
    std::vector<Rng> sensor_rngs_;
    std::vector<std::complex<double>> fading_;
    std::vector<Event> reset_events_;
};

}  // namespace skyway::env
