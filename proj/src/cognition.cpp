#include "skyway/cognition.hpp"

#include "skyway/kernels.hpp"
#include "skyway/log.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace skyway::cognition {

namespace {

constexpr std::array<const char*, kNumDirectives> kDirectiveNames{
    "FORWARD", "BACK", "LEFT", "RIGHT", "ASCEND", "DESCEND", "HOVER", "ACCELERATE", "DECELERATE"};
constexpr std::array<const char*, kNumMagnitudes> kMagnitudeNames{"GENTLE", "NORMAL", "AGGRESSIVE"};

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::string_view first_nonempty_line(std::string_view s) {
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t end = s.find('\n', pos);
        if (end == std::string_view::npos) end = s.size();
        std::string_view line = s.substr(pos, end - pos);
        if (!split_ws(line).empty()) return line;
        pos = end + 1;
    }
    return {};
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string node_name(int node, bool is_haps) {
    return is_haps ? std::string("HAPS") : "TBS-" + std::to_string(node);
}

double safe_db(double linear) { return 10.0 * std::log10(std::max(linear, 1e-12)); }

}  // namespace

const char* to_string(Directive d) { return kDirectiveNames[static_cast<int>(d)]; }
const char* to_string(Magnitude m) { return kMagnitudeNames[static_cast<int>(m)]; }

std::optional<Directive> parse_directive_token(std::string_view token) {
    for (int i = 0; i < kNumDirectives; ++i) {
        if (token == kDirectiveNames[i]) return static_cast<Directive>(i);
    }
    return std::nullopt;
}

std::optional<Magnitude> parse_magnitude_token(std::string_view token) {
    for (int i = 0; i < kNumMagnitudes; ++i) {
        if (token == kMagnitudeNames[i]) return static_cast<Magnitude>(i);
    }
    return std::nullopt;
}

std::string SemanticDirective::to_string() const {
    std::string out = "DIRECTIVE ";
    out += cognition::to_string(token);
    if (magnitude) {
        out += ' ';
        out += cognition::to_string(*magnitude);
    }
    return out;
}

std::optional<SemanticDirective> SemanticDirective::parse(std::string_view reply) {
    const auto words = split_ws(first_nonempty_line(reply));
    if (words.size() < 2 || words.size() > 3 || words[0] != "DIRECTIVE") return std::nullopt;
    auto token = parse_directive_token(words[1]);
    if (!token) return std::nullopt;
    SemanticDirective d{*token, std::nullopt};
    if (words.size() == 3) {
        d.magnitude = parse_magnitude_token(words[2]);
        if (!d.magnitude) return std::nullopt;
    }
    return d;
}

std::string format_meta_action(const env::MetaAction& action) {
    std::string out = "ACTION ";
    out += env::to_string(action.kind);
    for (int id : action.uav_ids) out += ' ' + std::to_string(id);
    return out;
}

std::optional<env::MetaAction> parse_meta_action(std::string_view reply) {
    const auto words = split_ws(first_nonempty_line(reply));
    if (words.size() < 2 || words[0] != "ACTION") return std::nullopt;
    env::MetaAction a;
    if (words[1] == "Idle") {
        a.kind = env::MetaKind::Idle;
    } else if (words[1] == "Offload") {
        a.kind = env::MetaKind::Offload;
    } else if (words[1] == "Recall") {
        a.kind = env::MetaKind::Recall;
    } else {
        return std::nullopt;
    }
    for (std::size_t i = 2; i < words.size(); ++i) {
        int id = 0;
        const std::string w(words[i]);
        std::size_t used = 0;
        try {
            id = std::stoi(w, &used);
        } catch (const std::exception&) {
            return std::nullopt;
        }
        if (used != w.size() || id < 0) return std::nullopt;
        a.uav_ids.push_back(id);
    }
    if (a.kind == env::MetaKind::Idle && !a.uav_ids.empty()) return std::nullopt;
    if (a.kind != env::MetaKind::Idle && a.uav_ids.empty()) return std::nullopt;
    return a;
}

PromptBundle PromptBundle::compose(std::string static_text, std::string dynamic_text, std::string memory_text) {
    PromptBundle b{std::move(static_text), std::move(dynamic_text), std::move(memory_text), {}};
    b.rendered.reserve(b.static_text.size() + b.dynamic_text.size() + b.memory_text.size() + 32);
    b.rendered += b.static_text;
    b.rendered += kObservationDelimiter;
    b.rendered += b.dynamic_text;
    b.rendered += kMemoryDelimiter;
    b.rendered += b.memory_text;
    return b;
}

std::string uav_static_prompt(int uav) {
    std::ostringstream os;
    os << "ROLE: You are the flight agent of UAV " << uav << " on a shared aerial highway.\n"
       << "OBJECTIVES: reach the target, keep at least the safety distance from every other UAV, "
          "fly smoothly with low tilt.\n"
       << "VOCABULARY: FORWARD BACK LEFT RIGHT ASCEND DESCEND HOVER ACCELERATE DECELERATE\n"
       << "MAGNITUDE: GENTLE NORMAL AGGRESSIVE\n"
       << "OUTPUT: exactly one line, DIRECTIVE <TOKEN> [<MAGNITUDE>]";
    return os.str();
}

std::string haps_static_prompt() {
    return "ROLE: You are the HAPS meta-controller of an integrated terrestrial and aerial network.\n"
           "OBJECTIVES: keep aggregate HAPS load under capacity, keep HAPS users within quota, "
           "maximize weighted rate, avoid needless handovers.\n"
           "ACTIONS: Offload moves listed HAPS users to terrestrial stations; Recall returns listed "
           "offloaded UAVs to the HAPS; Idle changes nothing.\n"
           "OUTPUT: exactly one line, ACTION <Offload|Recall|Idle> [ids...]";
}

std::string bin_label(double value, const std::vector<double>& edges, const std::vector<std::string>& labels) {
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (value < edges[i]) return labels.at(i);
    }
    return labels.at(edges.size());
}

std::string bearing_phrase(const Vec3& relative, double yaw_rad) {
    static constexpr std::array<const char*, 8> kSectors{"ahead",  "ahead-left",  "left",  "behind-left",
                                                         "behind", "behind-right", "right", "ahead-right"};
    if (std::hypot(relative.x(), relative.y()) < 1e-9) return "overhead";
    const double angle = std::atan2(relative.y(), relative.x()) - yaw_rad;
    long sector = std::lround(angle / (channel::kPi / 4.0)) % 8;
    if (sector < 0) sector += 8;
    return kSectors[static_cast<std::size_t>(sector)];
}

std::string vertical_phrase(double dz_m, double band_m) {
    if (dz_m > band_m) return "above";
    if (dz_m < -band_m) return "below";
    return "level";
}

std::string discretize(const env::LocalObservation& obs, const DiscretizeConfig& cfg) {
    std::ostringstream os;
    const double yaw = obs.euler_rad.z();
    const Vec3 to_target = obs.target_m - obs.position_m;
    const double horizontal = std::hypot(to_target.x(), to_target.y());
    os << "t=" << obs.t << " uav=" << obs.uav << '\n';
    os << "TARGET: distance=" << bin_label(to_target.norm(), cfg.distance_edges_m, cfg.distance_labels)
       << " horizontal=" << bin_label(horizontal, cfg.distance_edges_m, cfg.distance_labels)
       << " bearing=" << bearing_phrase(to_target, yaw) << " vertical=" << vertical_phrase(to_target.z(), cfg.vertical_band_m) << '\n';
    const double tilt = std::max(std::abs(obs.euler_rad.x()), std::abs(obs.euler_rad.y()));
    os << "MOTION: speed=" << bin_label(obs.velocity_mps.norm(), cfg.speed_edges_mps, cfg.speed_labels)
       << " attitude=" << (tilt < cfg.level_tilt_rad ? "LEVEL" : "TILTED") << '\n';
    os << "LINK: node=" << node_name(obs.serving_node, obs.serving_is_haps)
       << " sinr=" << bin_label(safe_db(obs.serving_sinr_linear), cfg.sinr_edges_db, cfg.sinr_labels) << '\n';

    std::vector<const env::Neighbor*> neighbors;
    for (const auto& n : obs.neighbors) neighbors.push_back(&n);
    std::stable_sort(neighbors.begin(), neighbors.end(), [](const auto* a, const auto* b) {
        const double da = a->relative_position_m.norm();
        const double db = b->relative_position_m.norm();
        return da != db ? da < db : a->id < b->id;
    });
    if (neighbors.empty()) {
        os << "NEIGHBORS: none";
    } else {
        os << "NEIGHBORS: " << neighbors.size();
        for (const auto* n : neighbors) {
            os << "\nNEIGHBOR " << n->id
               << " distance=" << bin_label(n->relative_position_m.norm(), cfg.distance_edges_m, cfg.distance_labels)
               << " bearing=" << bearing_phrase(n->relative_position_m, yaw)
               << " vertical=" << vertical_phrase(n->relative_position_m.z(), cfg.vertical_band_m);
        }
    }
    return os.str();
}

std::string discretize(const env::HapsObservation& obs, const DiscretizeConfig& cfg) {
    std::ostringstream os;
    const double fraction = obs.capacity_limit_bps > 0.0 ? obs.haps_load_bps / obs.capacity_limit_bps : 0.0;
    os << "t=" << obs.t << '\n';
    os << "LOAD: " << bin_label(fraction, cfg.load_edges, cfg.load_labels)
       << " load_mbps=" << fmt("%.6f", obs.haps_load_bps / 1e6)
       << " capacity_mbps=" << fmt("%.6f", obs.capacity_limit_bps / 1e6)
       << " remaining_mbps=" << fmt("%.6f", obs.remaining_capacity_bps / 1e6) << '\n';
    os << "QUOTA: n_H=" << obs.num_haps_users << " Q_H=" << obs.quota << '\n';
    os << "UAVS: " << obs.on_haps.size();
    for (std::size_t m = 0; m < obs.on_haps.size(); ++m) {
        const double wr_mbps = obs.weighted_rate_bps[m] / 1e6;
        os << "\nUAV " << m << " node=" << node_name(obs.serving_node[m], obs.on_haps[m])
           << " rate=" << (obs.on_haps[m] ? bin_label(wr_mbps, cfg.rate_edges_mbps, cfg.rate_labels) : "NONE")
           << " wr_mbps=" << fmt("%.6f", wr_mbps) << " snr_db=" << fmt("%.6f", safe_db(obs.full_band_snr[m]))
           << " offloaded=" << (obs.offloaded[m] ? "yes" : "no");
    }
    return os.str();
}

std::vector<double> raw_features(const env::LocalObservation& obs) {
    double nearest = -1.0;
    for (const auto& n : obs.neighbors) {
        const double d = n.relative_position_m.norm();
        if (nearest < 0.0 || d < nearest) nearest = d;
    }
    const Vec3 delta = obs.target_m - obs.position_m;
    return {obs.position_m.x(),   obs.position_m.y(),   obs.position_m.z(), obs.velocity_mps.x(),
            obs.velocity_mps.y(), obs.velocity_mps.z(), delta.x(),          delta.y(),
            delta.z(),            nearest,              safe_db(obs.serving_sinr_linear)};
}

std::vector<double> raw_features(const env::HapsObservation& obs) {
    double sum = 0.0;
    double lowest = -1.0;
    int offloaded = 0;
    for (std::size_t m = 0; m < obs.on_haps.size(); ++m) {
        if (obs.offloaded[m]) ++offloaded;
        if (!obs.on_haps[m]) continue;
        const double wr = obs.weighted_rate_bps[m] / 1e6;
        sum += wr;
        if (lowest < 0.0 || wr < lowest) lowest = wr;
    }
    const double mean = obs.num_haps_users > 0 ? sum / obs.num_haps_users : 0.0;
    return {obs.haps_load_bps / 1e6,  static_cast<double>(obs.num_haps_users), obs.remaining_capacity_bps / 1e6,
            mean, std::max(lowest, 0.0), static_cast<double>(offloaded)};
}

Embedder::Embedder(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size()) throw std::invalid_argument("Embedder: bound size mismatch");
}

Eigen::VectorXd Embedder::embed(const std::vector<double>& raw) {
    if (lower_.empty()) {
        lower_ = raw;
        upper_ = raw;
    }
    if (raw.size() != lower_.size()) throw std::invalid_argument("Embedder: feature size mismatch");
    for (std::size_t i = 0; i < raw.size(); ++i) {
        lower_[i] = std::min(lower_[i], raw[i]);
        upper_[i] = std::max(upper_[i], raw[i]);
    }
    return normalize(raw);
}

Eigen::VectorXd Embedder::normalize(const std::vector<double>& raw) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(raw.size()));
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double span = upper_[i] - lower_[i];
        const double v = span > 0.0 ? (raw[i] - lower_[i]) / span : 0.0;
        out[static_cast<Eigen::Index>(i)] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

Embedder Embedder::for_uav(const ScenarioConfig& cfg) {
    const Vec3& size = cfg.airspace.size_m;
    const double v = cfg.agent.decoder.max_speed_mps;
    const double r = cfg.env.perception_radius_m;
    return Embedder({0.0, 0.0, 0.0, -v, -v, -v, -size.x(), -size.y(), -size.z(), -1.0, -30.0},
                    {size.x(), size.y(), size.z(), v, v, v, size.x(), size.y(), size.z(), r, 60.0});
}

Embedder Embedder::for_haps(const ScenarioConfig& cfg) {
    const double cap = cfg.network.haps.capacity_limit_bps / 1e6;
    const double q = cfg.network.haps.quota;
    const double m = cfg.env.num_uavs;
    return Embedder({0.0, 0.0, 0.0, 0.0, 0.0, 0.0}, {cap, q, cap, cap, cap, m});
}

Json to_json(const MemoryRecord& r) {
    Json j;
    j["sequence"] = r.sequence;
    j["embedding"] = std::vector<double>(r.embedding.data(), r.embedding.data() + r.embedding.size());
    j["situation"] = r.situation;
    j["observation"] = r.observation;
    j["action"] = r.action;
    j["reward"] = r.reward;
    j["next_observation"] = r.next_observation;
    j["correction"] = r.correction;
    return j;
}

MemoryBuffer::MemoryBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("MemoryBuffer: capacity must be positive");
    slots_.reserve(std::min<std::size_t>(capacity_, 1024));
}

void MemoryBuffer::push(MemoryRecord record) {
    const auto d = static_cast<std::size_t>(record.embedding.size());
    if (count_ == 0 && slots_.empty()) dim_ = d;
    if (d != dim_) throw std::invalid_argument("MemoryBuffer: embedding dimension mismatch");
    record.sequence = next_sequence_++;
    if (slots_.size() < capacity_) {
        slots_.push_back(std::move(record));
        ++count_;
        return;
    }
    slots_[start_] = std::move(record);
    start_ = (start_ + 1) % capacity_;
}

bool MemoryBuffer::set_correction(std::uint64_t sequence, std::string text) {
    if (count_ == 0) return false;
    const std::uint64_t oldest = at(0).sequence;
    if (sequence < oldest || sequence >= next_sequence_) return false;
    slots_[(start_ + (sequence - oldest)) % capacity_].correction = std::move(text);
    return true;
}

std::vector<double> MemoryBuffer::packed_embeddings() const {
    std::vector<double> out(count_ * dim_);
    for (std::size_t i = 0; i < count_; ++i) {
        const auto& e = at(i).embedding;
        std::copy(e.data(), e.data() + e.size(), out.begin() + static_cast<std::ptrdiff_t>(i * dim_));
    }
    return out;
}

void MemoryBuffer::write_jsonl(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    for (std::size_t i = 0; i < count_; ++i) out << to_json(at(i)).dump() << '\n';
}

std::vector<Retrieved> retrieve_top_k(const MemoryBuffer& memory, const Eigen::VectorXd& query, int k) {
    if (k <= 0 || memory.size() == 0) return {};
    if (static_cast<std::size_t>(query.size()) != memory.dim()) {
        throw std::invalid_argument("retrieve_top_k: query dimension mismatch");
    }
    const std::vector<double> rows = memory.packed_embeddings();
    const std::vector<double> dist =
        kernels::euclidean_distances_parallel({query.data(), static_cast<std::size_t>(query.size())}, rows, memory.dim());
    std::vector<std::size_t> order(memory.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    // Larger logical index means newer.
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a > b; });
    std::vector<Retrieved> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back({&memory.at(order[i]), dist[order[i]]});
    return out;
}

std::string render_exemplar(const MemoryRecord& r) {
    std::ostringstream os;
    os << "SITUATION:\n" << r.situation << "\nACTION: " << r.action << "\nOUTCOME:";
    for (double v : r.reward) os << ' ' << fmt("%.4f", v);
    os << "\nLESSON: " << (r.correction.empty() ? "none" : r.correction);
    return os.str();
}

std::string render_memory(const std::vector<Retrieved>& exemplars) {
    if (exemplars.empty()) return "none";
    std::string out;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        if (i) out += "\n---\n";
        out += render_exemplar(*exemplars[i].record);
    }
    return out;
}

Reflection reflect(const std::string& situation, const std::string& action, const std::vector<double>& reward,
                   double scalarized_reward, double threshold, SemanticPolicy& policy) {
    Reflection out;
    if (!(scalarized_reward < threshold)) return out;
    out.triggered = true;
    std::ostringstream os;
    os << "REFLECTION REQUEST\nSITUATION:\n" << situation << "\nACTION: " << action << "\nREWARD:";
    for (double v : reward) os << ' ' << fmt("%.4f", v);
    os << "\nSCALARIZED: " << fmt("%.4f", scalarized_reward)
       << "\nWrite one paragraph explaining what went wrong and the corrected rule for next time.";
    auto reply = policy.complete({Tier::Reflection, os.str()});
    if (reply && !split_ws(*reply).empty()) {
        out.correction = *reply;
    } else {
        out.correction = std::string(kReflectionFallback);
        out.degraded = true;
        log::warn("reflection backend unavailable, using fallback text");
    }
    return out;
}

UavDecision semantic_decide_uav(SemanticPolicy& policy, const PromptBundle& prompt) {
    UavDecision d;
    std::string text = prompt.rendered;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ++d.attempts;
        auto reply = policy.complete({Tier::Uav, text});
        if (!reply) {
            d.degraded = true;
            d.reason = "backend unreachable or timed out";
            d.directive = {Directive::Hover, std::nullopt};
            return d;
        }
        d.reply = *reply;
        if (auto parsed = SemanticDirective::parse(*reply)) {
            d.directive = *parsed;
            return d;
        }
        text = prompt.rendered + std::string(kUavFormatReminder);
    }
    d.degraded = true;
    d.reason = "unparseable reply";
    d.directive = {Directive::Hover, std::nullopt};
    return d;
}

HapsDecision semantic_decide_haps(SemanticPolicy& policy, const PromptBundle& prompt) {
    HapsDecision d;
    std::string text = prompt.rendered;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ++d.attempts;
        auto reply = policy.complete({Tier::Haps, text});
        if (!reply) {
            d.degraded = true;
            d.reason = "backend unreachable or timed out";
            return d;
        }
        d.reply = *reply;
        if (auto parsed = parse_meta_action(*reply)) {
            d.action = *parsed;
            return d;
        }
        text = prompt.rendered + std::string(kHapsFormatReminder);
    }
    d.degraded = true;
    d.reason = "unparseable reply";
    return d;
}

}  // namespace skyway::cognition
