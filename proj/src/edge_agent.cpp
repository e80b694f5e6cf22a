#include "skyway/edge_agent.hpp"

#include "skyway/log.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace skyway::agent {

using cognition::Directive;

namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * channel::kPi); }

Mat3 rotation_from_euler(const Vec3& rpy) {
    return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
            Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
        .toRotationMatrix();
}

Json snapshot(const env::LocalObservation& o) {
    return {{"t", o.t},
            {"position_m", {o.position_m.x(), o.position_m.y(), o.position_m.z()}},
            {"velocity_mps", {o.velocity_mps.x(), o.velocity_mps.y(), o.velocity_mps.z()}},
            {"serving_node", o.serving_node},
            {"neighbors", o.neighbors.size()}};
}

}  // namespace

MotionSetpoint make_setpoint(const cognition::SemanticDirective& directive, const env::LocalObservation& obs,
                             const MotionDecoderConfig& cfg) {
    const double yaw = obs.euler_rad.z();
    const Vec3 heading(std::cos(yaw), std::sin(yaw), 0.0);
    const Vec3 left(-std::sin(yaw), std::cos(yaw), 0.0);
    const double speed = cfg.speed_levels_mps[static_cast<int>(directive.effective_magnitude())];
    MotionSetpoint sp;
    switch (directive.token) {
        case Directive::Forward: sp.target_velocity_mps = speed * heading; break;
        case Directive::Back: sp.target_velocity_mps = -speed * heading; break;
        case Directive::Left: sp.target_velocity_mps = speed * left; break;
        case Directive::Right: sp.target_velocity_mps = -speed * left; break;
        case Directive::Ascend: sp.target_velocity_mps = Vec3(0.0, 0.0, cfg.vertical_speed_mps); break;
        case Directive::Descend: sp.target_velocity_mps = Vec3(0.0, 0.0, -cfg.vertical_speed_mps); break;
        case Directive::Hover: sp.target_velocity_mps.setZero(); break;
        case Directive::Accelerate:
        case Directive::Decelerate: {
            const double current = obs.velocity_mps.norm();
            const Vec3 dir = current > 1e-6 ? Vec3(obs.velocity_mps / current) : heading;
            double target = 0.0;
            if (directive.token == Directive::Accelerate) {
                // From rest, start at the same fraction of the magnitude's cruise speed.
                target = std::max(current * (1.0 + cfg.speed_change_fraction), cfg.speed_change_fraction * speed);
            } else {
                target = current * (1.0 - cfg.speed_change_fraction);
            }
            sp.target_velocity_mps = target * dir;
            break;
        }
    }
    const double norm = sp.target_velocity_mps.norm();
    if (norm > cfg.max_speed_mps) sp.target_velocity_mps *= cfg.max_speed_mps / norm;
    // Heading hold at zero yaw.
    sp.target_yaw_rad = 0.0;
    return sp;
}

Vec4 mix(double thrust_N, const Vec3& torque_Nm, const physics::UavParams& params, double altitude_m) {
    const double h = std::max(altitude_m, params.min_altitude_m);
    const double ratio = params.prop_radius_m / (4.0 * h);
    const double k = params.thrust_coeff * (1.0 + params.ground_effect_coeff * ratio * ratio);
    const double lever = params.arm_length_m / std::sqrt(2.0);
    const double c = params.torque_coeff / k;
    const double s = thrust_N;
    const double x = torque_Nm.x() / lever;
    const double y = torque_Nm.y() / lever;
    const double z = torque_Nm.z() / c;
    const Vec4 force(s + x + y + z, s - x + y - z, s - x - y + z, s + x - y - z);
    Vec4 rpm;
    for (int i = 0; i < 4; ++i) rpm[i] = std::sqrt(std::max(force[i] / 4.0, 0.0) / k);
    physics::clamp_rpm(rpm, params);
    return rpm;
}

MotionController::MotionController(physics::UavParams params, MotionDecoderConfig cfg, double dt_s)
    : params_(std::move(params)), cfg_(std::move(cfg)), dt_s_(dt_s) {}

Vec4 MotionController::command(const MotionSetpoint& setpoint, const env::LocalObservation& obs) {
    const Vec3 error = setpoint.target_velocity_mps - obs.velocity_mps;
    const Vec3 rate = has_previous_ ? Vec3((error - previous_error_) / dt_s_) : Vec3::Zero();
    previous_error_ = error;
    has_previous_ = true;

    Vec3 accel = cfg_.velocity_kp * error + cfg_.velocity_kd * rate;
    accel.z() = std::clamp(accel.z(), -cfg_.max_vertical_accel_mps2, cfg_.max_vertical_accel_mps2);

    const double mass = params_.mass_kg;
    Vec3 force = mass * (accel + Vec3(0.0, 0.0, params_.gravity_mps2)) +
                 params_.drag_diag.cwiseProduct(obs.velocity_mps);
    force.z() = std::max(force.z(), 0.1 * mass * params_.gravity_mps2);
    const double horizontal = std::hypot(force.x(), force.y());
    const double limit = std::tan(cfg_.max_tilt_rad) * force.z();
    if (horizontal > limit) {
        force.x() *= limit / horizontal;
        force.y() *= limit / horizontal;
    }

    const double yaw = obs.euler_rad.z();
    const double cy = std::cos(yaw);
    const double sy = std::sin(yaw);
    const Vec3 fb(cy * force.x() + sy * force.y(), -sy * force.x() + cy * force.y(), force.z());
    const double pitch_d = std::atan2(fb.x(), fb.z());
    const double roll_d = std::atan2(-fb.y(), std::hypot(fb.x(), fb.z()));

    const Vec3 body_z = rotation_from_euler(obs.euler_rad).col(2);
    const double thrust = std::max(force.dot(body_z), 0.0);

    const Vec3& w = obs.angular_rate_radps;
    Vec3 torque;
    torque.x() = cfg_.attitude_kp * (roll_d - obs.euler_rad.x()) - cfg_.attitude_kd * w.x();
    torque.y() = cfg_.attitude_kp * (pitch_d - obs.euler_rad.y()) - cfg_.attitude_kd * w.y();
    torque.z() = cfg_.yaw_kp * wrap_angle(setpoint.target_yaw_rad - yaw) - cfg_.yaw_kd * w.z();
    return mix(thrust, torque, params_, obs.position_m.z());
}

Vec4 decode_motion(const cognition::SemanticDirective& directive, const env::LocalObservation& obs,
                   const physics::UavParams& params, const MotionDecoderConfig& cfg, double dt_s) {
    MotionController controller(params, cfg, dt_s);
    return controller.command(make_setpoint(directive, obs, cfg), obs);
}

int directive_index(const cognition::SemanticDirective& d) { return static_cast<int>(d.token); }

int telecom_feature_size(const ScenarioConfig& cfg) { return 6 + 2 * cfg.num_nodes() + cognition::kNumDirectives; }

Eigen::VectorXd telecom_features(const env::LocalObservation& obs, const cognition::SemanticDirective& directive,
                                 const ScenarioConfig& cfg) {
    const int nodes = cfg.num_nodes();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(telecom_feature_size(cfg));
    const Vec3& size = cfg.airspace.size_m;
    const double vmax = cfg.agent.decoder.max_speed_mps;
    for (int i = 0; i < 3; ++i) {
        f[i] = obs.position_m[i] / size[i];
        f[3 + i] = obs.velocity_mps[i] / vmax;
    }
    for (int n = 0; n < nodes && n < static_cast<int>(obs.node_sinr_linear.size()); ++n) {
        const double db = 10.0 * std::log10(std::max(obs.node_sinr_linear[n], 1e-12));
        f[6 + n] = std::clamp(db / cfg.agent.sinr_feature_scale_db, -2.0, 2.0);
    }
    if (obs.serving_node >= 0 && obs.serving_node < nodes) f[6 + nodes + obs.serving_node] = 1.0;
    f[6 + 2 * nodes + directive_index(directive)] = 1.0;
    return f;
}

int select_telecom(const rl::DoubleDqn& q, const Eigen::VectorXd& features, double epsilon, rl::Rng& rng) {
    return q.select(features, epsilon, rng);
}

EdgeAgent::EdgeAgent(int id, const ScenarioConfig& cfg, cognition::SemanticPolicy& policy, std::uint64_t seed)
    : id_(id),
      cfg_(cfg),
      policy_(&policy),
      rng_(env::make_stream(seed, env::kAgentStream, static_cast<std::uint64_t>(id))),
      dqn_(telecom_feature_size(cfg), cfg.num_nodes() + 1, cfg.agent.q, rng_),
      controller_(cfg.uav, cfg.agent.decoder, cfg.timescales.dt_s),
      embedder_(cognition::Embedder::for_uav(cfg)),
      memory_(cfg.cognition.memory_capacity) {}

EdgeAgent::~EdgeAgent() {
    if (pending_ && pending_->valid()) pending_->wait();
}

double EdgeAgent::epsilon() const { return rl::epsilon_at(steps_, cfg_.agent.q); }

void EdgeAgent::adopt(const cognition::UavDecision& d, int t) {
    ++decisions_;
    if (d.degraded) {
        degradations_.push_back({t, "uav", d.reason});
        log::warn("UAV " + std::to_string(id_) + " directive fallback: " + d.reason);
    }
    directive_ = d.directive;
    setpoint_stale_ = true;
}

void EdgeAgent::refresh_directive(const env::LocalObservation& obs) {
    if (pending_) {
        // A reply still outstanding at the gate: keep the current directive.
        if (pending_->wait_for(std::chrono::seconds(0)) != std::future_status::ready) {
            ++latency_misses_;
            return;
        }
        adopt(pending_->get(), obs.t);
        pending_.reset();
    }
    flush_reflections();
    std::string memory_text = "none";
    if (cfg_.ablation.memory_prompt && memory_.size() > 0) {
        const auto query = embedder_.normalize(cognition::raw_features(obs));
        memory_text = cognition::render_memory(cognition::retrieve_top_k(memory_, query, cfg_.cognition.top_k));
    }
    auto bundle = cognition::PromptBundle::compose(cognition::uav_static_prompt(id_),
                                                   cognition::discretize(obs, cfg_.cognition.discretize), memory_text);
    if (policy_->synchronous()) {
        const auto d = cognition::semantic_decide_uav(*policy_, bundle);
        if (cfg_.output.log_prompts) prompts_.push_back({obs.t, bundle.rendered, d.reply});
        adopt(d, obs.t);
        return;
    }
    if (cfg_.output.log_prompts) prompts_.push_back({obs.t, bundle.rendered, ""});
    pending_t_ = obs.t;
    pending_ = std::async(std::launch::async, [policy = policy_, b = std::move(bundle)] {
        return cognition::semantic_decide_uav(*policy, b);
    });
}

env::TelecomCommand EdgeAgent::choose_telecom(const env::LocalObservation& obs, const Eigen::VectorXd& features) {
    const int tbs = cfg_.num_nodes() - 1;
    const auto& mode = cfg_.agent.telecom_policy;
    if (mode == "stay") return {};
    if (mode == "greedy_haps") {
        return obs.serving_is_haps ? env::TelecomCommand{} : env::TelecomCommand{env::TelecomKind::RequestHaps, -1};
    }
    return env::TelecomCommand::from_index(select_telecom(dqn_, features, epsilon(), rng_), tbs);
}

env::JointAction EdgeAgent::act(const env::LocalObservation& obs, const env::Gates& gates) {
    if (gates.llm) {
        refresh_directive(obs);
    } else if (pending_ && pending_->wait_for(std::chrono::seconds(0)) == std::future_status::ready) {
        adopt(pending_->get(), obs.t);
        pending_.reset();
    }
    if (setpoint_stale_) {
        setpoint_ = make_setpoint(directive_, obs, cfg_.agent.decoder);
        setpoint_stale_ = false;
    }
    env::JointAction action;
    action.rotor_rpm = controller_.command(setpoint_, obs);
    const Eigen::VectorXd features = telecom_features(obs, directive_, cfg_);
    action.telecom = choose_telecom(obs, features);

    last_obs_ = obs;
    last_situation_ = cognition::discretize(obs, cfg_.cognition.discretize);
    last_features_ = features;
    last_telecom_ = action.telecom;
    has_last_ = true;
    return action;
}

void EdgeAgent::observe(const env::LocalObservation& next_obs, const env::RewardVector& reward, bool terminal) {
    if (!has_last_) return;
    const Eigen::Vector4d signed_reward = reward.signed_vector();
    const std::vector<double> r(signed_reward.data(), signed_reward.data() + 4);
    const double scalar = reward.scalarize(cfg_.cognition.reflection_weights);

    cognition::MemoryRecord rec;
    rec.embedding = embedder_.embed(cognition::raw_features(last_obs_));
    rec.situation = last_situation_;
    rec.observation = snapshot(last_obs_);
    rec.action = directive_.to_string() + " | " + last_telecom_.to_string();
    rec.reward = r;
    rec.next_observation = snapshot(next_obs);
    const std::uint64_t seq = memory_.next_sequence();
    if (scalar < cfg_.cognition.reflection_threshold) {
        reflections_.push_back({seq, rec.situation, rec.action, r, scalar});
    }
    memory_.push(std::move(rec));

    const int tbs = cfg_.num_nodes() - 1;
    rl::Transition tr;
    tr.state = last_features_;
    tr.action = last_telecom_.index(tbs);
    tr.reward = reward.r_tele - reward.c_ho;
    tr.next_state = telecom_features(next_obs, directive_, cfg_);
    tr.terminal = terminal;
    dqn_.remember(std::move(tr));
    ++steps_;

    const auto& q = cfg_.agent.q;
    if (cfg_.agent.telecom_policy == "ddqn" && dqn_.replay().size() >= std::max(q.warmup_transitions, q.batch_size) &&
        q.learn_every_steps > 0 && steps_ % q.learn_every_steps == 0) {
        last_loss_ = dqn_.learn_step(rng_);
    }
}

void EdgeAgent::flush_reflections() {
    for (auto& p : reflections_) {
        auto out = cognition::reflect(p.situation, p.action, p.reward, p.scalar, cfg_.cognition.reflection_threshold,
                                      *policy_);
        if (out.degraded) degradations_.push_back({last_obs_.t, "reflection", "backend unavailable"});
        memory_.set_correction(p.sequence, std::move(out.correction));
    }
    reflections_.clear();
}

std::vector<DegradationEvent> EdgeAgent::take_degradations() { return std::exchange(degradations_, {}); }

std::vector<PromptLog> EdgeAgent::take_prompts() { return std::exchange(prompts_, {}); }

}  // namespace skyway::agent
