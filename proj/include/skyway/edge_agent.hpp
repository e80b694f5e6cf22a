#pragma once

#include "skyway/cognition.hpp"
#include "skyway/config.hpp"
#include "skyway/env.hpp"
#include "skyway/qnetwork.hpp"

#include <future>
#include <optional>
#include <string>
#include <vector>

namespace skyway::agent {

struct MotionSetpoint {
    Vec3 target_velocity_mps = Vec3::Zero();
    double target_yaw_rad = 0.0;
};

MotionSetpoint make_setpoint(const cognition::SemanticDirective& directive, const env::LocalObservation& obs,
                             const MotionDecoderConfig& cfg);

// Per-rotor RPMs realizing collective thrust and body torques at an altitude; clamped.
Vec4 mix(double thrust_N, const Vec3& torque_Nm, const physics::UavParams& params, double altitude_m);

// Cascaded PD: velocity error -> desired attitude and thrust -> body torques -> mixer.
class MotionController {
public:
    MotionController(physics::UavParams params, MotionDecoderConfig cfg, double dt_s);

    Vec4 command(const MotionSetpoint& setpoint, const env::LocalObservation& obs);
    void reset() { has_previous_ = false; }

private:
    physics::UavParams params_;
    MotionDecoderConfig cfg_;
    double dt_s_;
    Vec3 previous_error_ = Vec3::Zero();
    bool has_previous_ = false;
};

// Setpoint plus one controller evaluation with no derivative history.
Vec4 decode_motion(const cognition::SemanticDirective& directive, const env::LocalObservation& obs,
                   const physics::UavParams& params, const MotionDecoderConfig& cfg, double dt_s);

int directive_index(const cognition::SemanticDirective& d);

// Position and velocity (scaled), per-node SINR, serving-node one-hot, directive one-hot.
Eigen::VectorXd telecom_features(const env::LocalObservation& obs, const cognition::SemanticDirective& directive,
                                 const ScenarioConfig& cfg);
int telecom_feature_size(const ScenarioConfig& cfg);

int select_telecom(const rl::DoubleDqn& q, const Eigen::VectorXd& features, double epsilon, rl::Rng& rng);

struct DegradationEvent {
    int t = 0;
    std::string tier;
    std::string reason;
};

struct PromptLog {
    int t = 0;
    std::string prompt;
    std::string reply;
};

class EdgeAgent {
public:
    // policy must outlive the agent and may be shared.
    EdgeAgent(int id, const ScenarioConfig& cfg, cognition::SemanticPolicy& policy, std::uint64_t seed);
    ~EdgeAgent();
    EdgeAgent(EdgeAgent&&) = default;

    env::JointAction act(const env::LocalObservation& obs, const env::Gates& gates);
    void observe(const env::LocalObservation& next_obs, const env::RewardVector& reward, bool terminal);
    // Issues pending reflections now (normally done at the next LLM gate).
    void flush_reflections();

    const cognition::SemanticDirective& directive() const { return directive_; }
    const MotionSetpoint& setpoint() const { return setpoint_; }
    const cognition::MemoryBuffer& memory() const { return memory_; }
    const rl::DoubleDqn& dqn() const { return dqn_; }
    rl::DoubleDqn& dqn() { return dqn_; }
    long steps() const { return steps_; }
    double epsilon() const;
    double last_loss() const { return last_loss_; }
    int decisions() const { return decisions_; }
    int latency_misses() const { return latency_misses_; }
    std::vector<DegradationEvent> take_degradations();
    std::vector<PromptLog> take_prompts();

private:
    struct PendingReflection {
        std::uint64_t sequence;
        std::string situation;
        std::string action;
        std::vector<double> reward;
        double scalar;
    };

    void refresh_directive(const env::LocalObservation& obs);
    void adopt(const cognition::UavDecision& d, int t);
    env::TelecomCommand choose_telecom(const env::LocalObservation& obs, const Eigen::VectorXd& features);

    int id_;
    ScenarioConfig cfg_;
    cognition::SemanticPolicy* policy_;
    rl::Rng rng_;
    rl::DoubleDqn dqn_;
    MotionController controller_;
    cognition::Embedder embedder_;
    cognition::MemoryBuffer memory_;

    cognition::SemanticDirective directive_;
    MotionSetpoint setpoint_;
    bool setpoint_stale_ = true;
    std::optional<std::future<cognition::UavDecision>> pending_;
    int pending_t_ = 0;

    env::LocalObservation last_obs_;
    std::string last_situation_;
    Eigen::VectorXd last_features_;
    env::TelecomCommand last_telecom_;
    bool has_last_ = false;

    std::vector<PendingReflection> reflections_;
    std::vector<DegradationEvent> degradations_;
    std::vector<PromptLog> prompts_;
    long steps_ = 0;
    double last_loss_ = rl::DoubleDqn::kNoLoss;
    int decisions_ = 0;
    int latency_misses_ = 0;
};

}  // namespace skyway::agent
