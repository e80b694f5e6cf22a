#include "toy_tasks.hpp"

#include "oracles.hpp"
#include "skyway/edge_agent.hpp"
#include "skyway/env.hpp"
#include "skyway/qnetwork.hpp"

#include <algorithm>
#include <cmath>

using namespace skyway;

namespace toy {

namespace {

QLearnerConfig small_config() {
    QLearnerConfig q;
    q.hidden_layers = {32, 32};
    q.batch_size = 32;
    q.warmup_transitions = 200;
    q.target_sync_steps = 200;
    q.replay_capacity = 20000;
    q.discount = 0.5;
    q.epsilon_start = 1.0;
    q.epsilon_end = 0.05;
    q.epsilon_decay_steps = 10000;
    return q;
}

}  // namespace

ChannelTask channel_selection(std::uint64_t seed, int steps) {
    constexpr int kTbs = 2;
    constexpr int kNodes = kTbs + 1;
    const double mean_db[kNodes] = {5.0, 25.0, 10.0};
    const auto cfg = small_config();
    rl::Rng rng(seed);
    rl::DoubleDqn dqn(2 * kNodes, kTbs + 2, cfg, rng);
    std::normal_distribution<double> jitter(0.0, 1.0);

    auto draw = [&](int serving) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(2 * kNodes);
        for (int b = 0; b < kNodes; ++b) s[b] = (mean_db[b] + jitter(rng)) / 40.0;
        s[kNodes + serving] = 1.0;
        return s;
    };

    int serving = 0;
    Eigen::VectorXd state = draw(serving);
    double first = 0.0, last = 0.0;
    for (int t = 0; t < steps; ++t) {
        const int a = dqn.select(state, rl::epsilon_at(t, cfg), rng);
        const auto cmd = env::TelecomCommand::from_index(a, kTbs);
        int next_node = serving;
        if (cmd.kind == env::TelecomKind::Handover) next_node = cmd.target_tbs;
        if (cmd.kind == env::TelecomKind::RequestHaps) next_node = kTbs;
        const double ho = next_node != serving ? 1.0 : 0.0;
        serving = next_node;
        Eigen::VectorXd next = draw(serving);
        const double sinr = std::pow(10.0, next[serving] * 40.0 / 10.0);
        const double reward = std::log2(1.0 + sinr) - ho;
        dqn.remember({state, a, reward, next, false});
        if (dqn.replay().size() >= std::max(cfg.warmup_transitions, cfg.batch_size)) dqn.learn_step(rng);
        if (t < 1000) first += reward;
        if (t >= steps - 1000) last += reward;
        state = next;
    }
    return {first / 1000.0, last / 1000.0};
}

double two_state_mdp_error(std::uint64_t seed, int steps) {
    // s0: a0 stays (r=0), a1 moves to s1 (r=1); s1: a0 returns (r=0), a1 ends the episode (r=2).
    const std::vector<std::vector<int>> next{{0, 1}, {0, 1}};
    const std::vector<std::vector<double>> reward{{0.0, 1.0}, {0.0, 2.0}};
    const std::vector<std::vector<bool>> terminal{{false, false}, {false, true}};
    auto cfg = small_config();
    cfg.hidden_layers = {16};
    const auto q_star = oracle::value_iteration(next, reward, terminal, cfg.discount);

    rl::Rng rng(seed);
    rl::DoubleDqn dqn(2, 2, cfg, rng);
    auto onehot = [](int s) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
        v[s] = 1.0;
        return v;
    };
    std::uniform_int_distribution<int> coin(0, 1);
    int s = 0;
    for (int t = 0; t < steps; ++t) {
        const int a = coin(rng);
        const int s2 = next[s][a];
        dqn.remember({onehot(s), a, reward[s][a], onehot(s2), terminal[s][a]});
        if (dqn.replay().size() >= cfg.batch_size) dqn.learn_step(rng);
        s = terminal[s][a] ? 0 : s2;
    }
    double worst = 0.0;
    for (int st = 0; st < 2; ++st) {
        const auto q = dqn.online().forward(onehot(st));
        for (int a = 0; a < 2; ++a) worst = std::max(worst, std::abs(q[a] - q_star[st][a]));
    }
    return worst;
}

double gradient_check_error(std::uint64_t seed) {
    rl::Rng rng(seed);
    const int in = 3, out = 3;
    rl::Mlp online({in, 4, 4, out}, rng);
    rl::Mlp target({in, 4, 4, out}, rng);
    std::normal_distribution<double> g(0.0, 1.0);
    // Zero biases can park a unit exactly on the ReLU kink; move off it.
    auto jittered = online.flatten();
    for (auto& v : jittered) v += 0.1 * g(rng);
    online.unflatten(jittered);
    std::vector<rl::Transition> data;
    for (int i = 0; i < 5; ++i) {
        rl::Transition t;
        t.state = Eigen::VectorXd(in);
        t.next_state = Eigen::VectorXd(in);
        for (int k = 0; k < in; ++k) {
            t.state[k] = g(rng);
            t.next_state[k] = g(rng);
        }
        t.action = i % out;
        t.reward = g(rng);
        t.terminal = i == 4;
        data.push_back(t);
    }
    std::vector<const rl::Transition*> batch;
    for (const auto& t : data) batch.push_back(&t);

    rl::Mlp grad = online.zeros_like();
    rl::double_q_loss(online, target, batch, 0.9, &grad);
    const auto analytic = grad.flatten();

    // The update is a semi-gradient: targets are held fixed while differentiating.
    std::vector<double> y;
    for (const auto& t : data) y.push_back(rl::double_q_target(online, target, t, 0.9));
    auto fixed_loss = [&](const rl::Mlp& net) {
        double acc = 0.0;
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double err = net.forward(data[j].state)[data[j].action] - y[j];
            acc += err * err;
        }
        return acc / static_cast<double>(data.size());
    };
    auto theta = online.flatten();
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        online.unflatten(theta);
        const double up = fixed_loss(online);
        theta[i] = keep - h;
        online.unflatten(theta);
        const double down = fixed_loss(online);
        theta[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
    }
    online.unflatten(theta);
    return worst;
}

}  // namespace toy

namespace toy {

Flight hold_directive(const cognition::SemanticDirective& d, double seconds, const ScenarioConfig& cfg) {
    const auto& p = cfg.uav;
    physics::RigidBodyState s;
    s.position_m = {500.0, 500.0, 150.0};
    s.rotor_rpm = Vec4::Constant(physics::hover_rpm(p, 150.0));
    agent::MotionController controller(p, cfg.agent.decoder, cfg.timescales.dt_s);
    const int steps = static_cast<int>(std::lround(seconds / cfg.timescales.dt_s));
    const int gate = cfg.timescales.llm_period_steps;
    const double rad_to_deg = 180.0 / std::acos(-1.0);
    Flight out;
    agent::MotionSetpoint sp;
    for (int t = 0; t < steps; ++t) {
        env::LocalObservation o;
        o.t = t;
        o.position_m = s.position_m;
        o.velocity_mps = s.velocity_mps;
        o.euler_rad = s.euler_rpy();
        o.angular_rate_radps = s.angular_rate_radps;
        o.rotor_rpm = s.rotor_rpm;
        // The setpoint is latched at each decision gate, as in the agent.
        if (t % gate == 0) sp = agent::make_setpoint(d, o, cfg.agent.decoder);
        const Vec4 rpm = controller.command(sp, o);
        if (!rpm.allFinite()) out.finite = false;
        if ((rpm.array() < p.rpm_min).any() || (rpm.array() > p.rpm_max).any()) out.rpm_in_bounds = false;
        try {
            s = physics::step(s, rpm, p, cfg.integrator());
        } catch (const SimulationFault&) {
            out.finite = false;
            return out;
        }
        const Vec3 e = s.euler_rpy();
        out.max_tilt_deg = std::max({out.max_tilt_deg, std::abs(e.x()) * rad_to_deg, std::abs(e.y()) * rad_to_deg});
    }
    out.final_ground_speed_mps = std::hypot(s.velocity_mps.x(), s.velocity_mps.y());
    out.final_vertical_speed_mps = s.velocity_mps.z();
    out.finite = out.finite && s.finite();
    return out;
}

}  // namespace toy
