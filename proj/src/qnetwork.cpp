#include "skyway/qnetwork.hpp"

#include <cmath>
#include <fstream>

namespace skyway::rl {

Mlp::Mlp(std::vector<int> layer_sizes, Rng& rng) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    for (int s : sizes_) {
        if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const double bound = std::sqrt(6.0 / sizes_[l]);
        std::uniform_real_distribution<double> u(-bound, bound);
        Eigen::MatrixXd w(sizes_[l + 1], sizes_[l]);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
        weights.push_back(std::move(w));
        biases.push_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
    }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        a = weights[l] * a + biases[l];
        if (l + 1 < weights.size()) a = a.cwiseMax(0.0);
    }
    return a;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        a = (weights[l] * a).colwise() + biases[l];
        if (l + 1 < weights.size()) a = a.cwiseMax(0.0);
    }
    return a;
}

void Mlp::backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& d_out, Mlp& grad) const {
    const std::size_t layers = weights.size();
    std::vector<Eigen::MatrixXd> acts;  // inputs to each layer
    acts.reserve(layers);
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < layers; ++l) {
        acts.push_back(a);
        a = (weights[l] * a).colwise() + biases[l];
        if (l + 1 < layers) a = a.cwiseMax(0.0);
    }
    Eigen::MatrixXd dz = d_out;
    for (std::size_t l = layers; l-- > 0;) {
        grad.weights[l] += dz * acts[l].transpose();
        grad.biases[l] += dz.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd da = weights[l].transpose() * dz;
        // acts[l] is the post-ReLU output of layer l-1.
        dz = da.array() * (acts[l].array() > 0.0).cast<double>();
    }
}

Mlp Mlp::zeros_like() const {
    Mlp out = *this;
    for (auto& w : out.weights) w.setZero();
    for (auto& b : out.biases) b.setZero();
    return out;
}

std::size_t Mlp::num_parameters() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

std::vector<double> Mlp::flatten() const {
    std::vector<double> out;
    out.reserve(num_parameters());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.insert(out.end(), weights[l].data(), weights[l].data() + weights[l].size());
        out.insert(out.end(), biases[l].data(), biases[l].data() + biases[l].size());
    }
    return out;
}

void Mlp::unflatten(std::span<const double> flat) {
    if (flat.size() != num_parameters()) throw std::invalid_argument("Mlp::unflatten: size mismatch");
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index i = 0; i < weights[l].size(); ++i) weights[l].data()[i] = flat[k++];
        for (Eigen::Index i = 0; i < biases[l].size(); ++i) biases[l].data()[i] = flat[k++];
    }
}

double Mlp::squared_norm() const {
    double s = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l) s += weights[l].squaredNorm() + biases[l].squaredNorm();
    return s;
}

void Mlp::scale(double factor) {
    for (auto& w : weights) w *= factor;
    for (auto& b : biases) b *= factor;
}

void Mlp::save(const std::string& prefix, std::uint64_t seed) const {
    const Json header{{"layer_sizes", sizes_}, {"seed", seed}, {"dtype", "float64"}, {"parameters", num_parameters()}};
    std::ofstream(prefix + ".json") << header.dump(2) << '\n';
    const auto flat = flatten();
    std::ofstream bin(prefix + ".bin", std::ios::binary);
    bin.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!bin) throw std::runtime_error("cannot write " + prefix + ".bin");
}

Mlp Mlp::load(const std::string& prefix) {
    std::ifstream hin(prefix + ".json");
    if (!hin) throw std::runtime_error("cannot open " + prefix + ".json");
    const Json header = Json::parse(hin);
    Rng rng(header.value("seed", std::uint64_t{0}));
    Mlp net(header.at("layer_sizes").get<std::vector<int>>(), rng);
    std::vector<double> flat(net.num_parameters());
    std::ifstream bin(prefix + ".bin", std::ios::binary);
    bin.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!bin) throw std::runtime_error("truncated " + prefix + ".bin");
    net.unflatten(flat);
    return net;
}

Adam::Adam(const Mlp& shape, double lr, double beta1, double beta2, double epsilon)
    : learning_rate(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(shape.zeros_like()), v_(shape.zeros_like()) {}

void Adam::step(Mlp& params, const Mlp& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        p.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon_);
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        update(params.weights[l], grad.weights[l], m_.weights[l], v_.weights[l]);
        update(params.biases[l], grad.biases[l], m_.biases[l], v_.biases[l]);
    }
}

void ReplayBuffer::push(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
    std::vector<const Transition*> out;
    if (data_.empty()) return out;
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(&data_[pick(rng)]);
    return out;
}

int argmax(const Eigen::VectorXd& q) {
    int best = 0;
    for (int i = 1; i < q.size(); ++i) {
        if (q[i] > q[best]) best = i;
    }
    return best;
}

double double_q_target(const Mlp& online, const Mlp& target, const Transition& t, double gamma) {
    if (t.terminal) return t.reward;
    const int a = argmax(online.forward(t.next_state));
    return t.reward + gamma * target.forward(t.next_state)[a];
}

double double_q_loss(const Mlp& online, const Mlp& target, std::span<const Transition* const> batch, double gamma,
                     Mlp* grad) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) return 0.0;
    Eigen::MatrixXd states(online.input_size(), n);
    for (Eigen::Index j = 0; j < n; ++j) states.col(j) = batch[j]->state;
    const Eigen::MatrixXd q = online.forward_batch(states);
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(q.rows(), n);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double y = double_q_target(online, target, *batch[j], gamma);
        const double err = q(batch[j]->action, j) - y;
        loss += err * err;
        d_out(batch[j]->action, j) = 2.0 * err / static_cast<double>(n);
    }
    if (grad) online.backward(states, d_out, *grad);
    return loss / static_cast<double>(n);
}

double epsilon_at(long step, const QLearnerConfig& cfg) {
    if (cfg.epsilon_decay_steps <= 0 || step >= cfg.epsilon_decay_steps) return cfg.epsilon_end;
    const double frac = static_cast<double>(std::max(step, 0L)) / cfg.epsilon_decay_steps;
    return std::max(cfg.epsilon_end, cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start));
}

DoubleDqn::DoubleDqn(int input_size, int num_actions, const QLearnerConfig& cfg, Rng& init_rng)
    : cfg_(cfg), replay_(cfg.replay_capacity) {
    std::vector<int> sizes{input_size};
    sizes.insert(sizes.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
    sizes.push_back(num_actions);
    online_ = Mlp(sizes, init_rng);
    target_ = online_;
    adam_ = Adam(online_, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
}

int DoubleDqn::select(const Eigen::VectorXd& state, double epsilon, Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < epsilon) {
        std::uniform_int_distribution<int> pick(0, online_.output_size() - 1);
        return pick(rng);
    }
    return argmax(online_.forward(state));
}

double DoubleDqn::learn_step(Rng& rng) {
    if (replay_.size() < cfg_.batch_size || replay_.size() == 0) return kNoLoss;
    const auto batch = replay_.sample(cfg_.batch_size, rng);
    Mlp grad = online_.zeros_like();
    const double loss = double_q_loss(online_, target_, batch, cfg_.discount, &grad);
    const double norm = std::sqrt(grad.squared_norm());
    if (cfg_.gradient_clip > 0.0 && norm > cfg_.gradient_clip) grad.scale(cfg_.gradient_clip / norm);
    adam_.step(online_, grad);
    ++updates_;
    if (cfg_.target_sync_steps > 0 && updates_ % cfg_.target_sync_steps == 0) sync_target();
    return loss;
}

}  // namespace skyway::rl
