#pragma once

#include "skyway/config.hpp"

#include <Eigen/Core>

#include <random>
#include <span>
#include <string>
#include <vector>

namespace skyway::rl {

using Rng = std::mt19937_64;

struct Transition {
    Eigen::VectorXd state;
    int action = 0;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool terminal = false;
};

// Fully connected ReLU network with a linear head.
class Mlp {
public:
    Mlp() = default;
    // layer_sizes = {input, hidden..., output}; He-uniform weights, zero biases.
    Mlp(std::vector<int> layer_sizes, Rng& rng);

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    // Columns are samples.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;
    // Accumulates d(sum <d_out, f(x)>)/d(params) into grad (same shape as *this).
    void backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& d_out, Mlp& grad) const;

    Mlp zeros_like() const;
    std::size_t num_parameters() const;
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> flat);
    double squared_norm() const;
    void scale(double factor);

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }

    // <prefix>.json header (layer sizes, seed) and <prefix>.bin raw little-endian doubles.
    void save(const std::string& prefix, std::uint64_t seed) const;
    static Mlp load(const std::string& prefix);

    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

private:
    std::vector<int> sizes_;
};

class Adam {
public:
    Adam() = default;
    Adam(const Mlp& shape, double lr, double beta1, double beta2, double epsilon);
    void step(Mlp& params, const Mlp& grad);
    double learning_rate = 1e-3;

private:
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double epsilon_ = 1e-8;
    long t_ = 0;
    Mlp m_;
    Mlp v_;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {}
    void push(Transition t);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    // Uniform with replacement.
    std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;
    const Transition& at(std::size_t i) const { return data_[i]; }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> data_;
};

// Lowest index among maxima.
int argmax(const Eigen::VectorXd& q);

// r for terminal transitions, else r + gamma * Q_target(s', argmax_a Q_online(s', a)).
double double_q_target(const Mlp& online, const Mlp& target, const Transition& t, double gamma);

// Mean squared Bellman error; fills grad (w.r.t. online parameters) when non-null.
double double_q_loss(const Mlp& online, const Mlp& target, std::span<const Transition* const> batch, double gamma,
                     Mlp* grad);

// Linear decay from start to end over decay_steps, then flat.
double epsilon_at(long step, const QLearnerConfig& cfg);

class DoubleDqn {
public:
    static constexpr double kNoLoss = -1.0;

    DoubleDqn(int input_size, int num_actions, const QLearnerConfig& cfg, Rng& init_rng);

    // Greedy with probability 1 - epsilon, else uniform.
    int select(const Eigen::VectorXd& state, double epsilon, Rng& rng) const;
    void remember(Transition t) { replay_.push(std::move(t)); }
    // One gradient step on a sampled batch; kNoLoss if the replay is smaller than the batch.
    double learn_step(Rng& rng);
    void sync_target() { target_ = online_; }

    const Mlp& online() const { return online_; }
    Mlp& online() { return online_; }
    const Mlp& target() const { return target_; }
    const ReplayBuffer& replay() const { return replay_; }
    long updates() const { return updates_; }
    const QLearnerConfig& config() const { return cfg_; }

private:
    QLearnerConfig cfg_;
    Mlp online_;
    Mlp target_;
    Adam adam_;
    ReplayBuffer replay_;
    long updates_ = 0;
};

}  // namespace skyway::rl
