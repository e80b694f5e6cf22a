#include "skyway/runner.hpp"

#include "skyway/cognition.hpp"
#include "skyway/edge_agent.hpp"
#include "skyway/env.hpp"
#include "skyway/log.hpp"
#include "skyway/meta_controller.hpp"

#include <omp.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace skyway::runner {

namespace fs = std::filesystem;
using OJson = nlohmann::ordered_json;

namespace {

OJson vec3(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
OJson vec4(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

// Shared by the live run and the trajectory re-aggregation so both sum in the same order.
struct Accumulator {
    EpisodeSummary s;
    std::set<int> steps;
    std::set<int> uavs;
    std::set<int> violation_steps;
    double rate_sum_mbps = 0.0;
    long samples = 0;

    void add(const OJson& line) {
        steps.insert(line["t"].get<int>());
        uavs.insert(line["uav"].get<int>());
        s.total_r_tran += line["r_tran"].get<double>();
        s.total_r_tele += line["r_tele"].get<double>();
        s.total_c_safe += line["c_safe"].get<double>();
        s.total_c_ho += line["c_ho"].get<double>();
        if (line["handover"].get<bool>()) ++s.handovers;
        if (line["forced"].get<bool>() && line["handover"].get<bool>()) ++s.forced_handovers;
        if (line["c_safe"].get<double>() > 0.0) ++s.collision_events;
        if (line["violation"].get<bool>()) violation_steps.insert(line["t"].get<int>());
        rate_sum_mbps += line["rate_bps"].get<double>() / 1e6;
        ++samples;
    }

    EpisodeSummary finish() const {
        EpisodeSummary out = s;
        out.steps = static_cast<int>(steps.size());
        out.num_uavs = static_cast<int>(uavs.size());
        const double denom = static_cast<double>(out.steps) * out.num_uavs;
        out.handover_probability = denom > 0 ? out.handovers / denom : 0.0;
        out.collision_rate = denom > 0 ? out.collision_events / denom : 0.0;
        out.capacity_violation_steps = static_cast<int>(violation_steps.size());
        out.capacity_violation_fraction = out.steps > 0 ? static_cast<double>(out.capacity_violation_steps) / out.steps : 0.0;
        out.mean_datarate_mbps = samples > 0 ? rate_sum_mbps / static_cast<double>(samples) : 0.0;
        return out;
    }
};

struct Writers {
    std::ofstream trajectory;
    std::ofstream events;
    std::ofstream meta;
    std::ofstream prompts;
    std::ofstream timeseries;

    explicit Writers(const fs::path& dir, const ScenarioConfig& cfg) {
        fs::create_directories(dir);
        if (cfg.output.trajectory_log) trajectory.open(dir / "trajectory.jsonl");
        events.open(dir / "events.jsonl");
        meta.open(dir / "meta.jsonl");
        if (cfg.output.log_prompts) prompts.open(dir / "prompts.jsonl");
        timeseries.open(dir / "timeseries.csv");
        timeseries << "t,uav,x,y,z,vx,vy,vz,roll_deg,pitch_deg,yaw_deg,rpm1,rpm2,rpm3,rpm4,rate_mbps,wr_mbps,serving,"
                      "directive\n";
    }
};

void write_event(std::ofstream& out, const env::Event& e) {
    if (!out.is_open()) return;
    OJson j{{"t", e.t}, {"type", e.type}, {"uav", e.uav}, {"from", e.from}, {"to", e.to}, {"detail", e.detail}};
    out << j.dump() << '\n';
}

// Runs body(i) for i in [0, n) on OpenMP threads, rethrowing the first failure.
template <typename F>
void parallel_for(int n, F&& body) {
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        try {
            body(i);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

struct Session {
    ScenarioConfig cfg;
    std::unique_ptr<cognition::SemanticPolicy> policy;
    std::vector<agent::EdgeAgent> agents;
    std::unique_ptr<meta::MetaController> meta;

    explicit Session(const ScenarioConfig& c) : cfg(c), policy(cognition::make_policy(c)) {
        agents.reserve(cfg.env.num_uavs);
        for (int m = 0; m < cfg.env.num_uavs; ++m) agents.emplace_back(m, cfg, *policy, cfg.seed);
        const bool use_policy = cfg.backend.mode != "rule";
        meta = std::make_unique<meta::MetaController>(cfg, policy.get(), use_policy);
    }
};

EpisodeSummary run_one(Session& session, std::uint64_t seed, Writers* out) {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioConfig& cfg = session.cfg;
    env::Environment environment(cfg);
    environment.reset(seed);
    const int count = cfg.env.num_uavs;
    const bool meta_on = cfg.ablation.meta_controller;

    Accumulator acc;
    EpisodeSummary extra;
    if (out) {
        for (const auto& e : environment.reset_events()) write_event(out->events, e);
        if (out->trajectory.is_open()) {
            OJson header{{"type", "episode"}, {"seed", seed}, {"num_uavs", count},
                         {"backend", cfg.backend.mode}, {"meta_controller", meta_on},
                         {"memory_prompt", cfg.ablation.memory_prompt}};
            out->trajectory << header.dump() << '\n';
        }
    }

    std::vector<env::LocalObservation> obs(count);
    for (int m = 0; m < count; ++m) obs[m] = environment.observe_local(m);

    std::optional<env::HapsObservation> meta_prev_obs;
    env::MetaAction meta_prev_action;
    double meta_reward_acc = 0.0;
    int meta_reward_n = 0;

    std::vector<env::JointAction> actions(count);
    std::vector<env::LocalObservation> next(count);
    while (!environment.done()) {
        const int t = environment.world().t;
        const env::Gates gates = env::scheduler_gates(t, cfg.timescales);
        const long calls_before = session.policy->calls();
        std::vector<env::MetaAction> directives;

        if (gates.llm) ++extra.llm_gates;
        if (gates.haps) {
            ++extra.haps_gates;
            if (meta_on) {
                const auto haps_obs = environment.observe_haps();
                if (meta_prev_obs) {
                    session.meta->observe(*meta_prev_obs, meta_prev_action,
                                          meta_reward_n ? meta_reward_acc / meta_reward_n : 0.0, haps_obs);
                }
                auto decision = session.meta->decide(haps_obs);
                extra.offload_sizes.push_back(
                    decision.action.kind == env::MetaKind::Offload ? static_cast<int>(decision.action.uav_ids.size()) : 0);
                if (decision.degraded) ++extra.degradations;
                if (out) {
                    OJson j{{"t", t},
                            {"action", cognition::format_meta_action(decision.action)},
                            {"from_policy", decision.from_policy},
                            {"degraded", decision.degraded},
                            {"reason", decision.reason},
                            {"haps_load_bps", haps_obs.haps_load_bps},
                            {"n_H", haps_obs.num_haps_users}};
                    out->meta << j.dump() << '\n';
                    if (out->prompts.is_open() && !decision.prompt.empty()) {
                        out->prompts << OJson{{"t", t}, {"tier", "haps"}, {"prompt", decision.prompt},
                                              {"reply", decision.reply}}
                                            .dump()
                                     << '\n';
                    }
                }
                meta_prev_obs = haps_obs;
                meta_prev_action = decision.action;
                meta_reward_acc = 0.0;
                meta_reward_n = 0;
                if (decision.action.kind != env::MetaKind::Idle) directives.push_back(std::move(decision.action));
            }
        }

        parallel_for(count, [&](int m) { actions[m] = session.agents[m].act(obs[m], gates); });
        auto result = environment.step(actions, directives);
        for (int m = 0; m < count; ++m) next[m] = environment.observe_local(m);
        parallel_for(count, [&](int m) { session.agents[m].observe(next[m], result.rewards[m], result.done); });

        const long calls = session.policy->calls() - calls_before;
        extra.backend_calls += calls;
        if (!gates.llm && !gates.haps) extra.off_gate_backend_calls += calls;

        const double r_meta = meta::meta_reward(environment.world(), cfg);
        extra.total_meta_reward += r_meta;
        meta_reward_acc += r_meta;
        ++meta_reward_n;

        const auto& w = environment.world();
        for (int m = 0; m < count; ++m) {
            const auto& s = w.uavs[m];
            const auto& r = result.rewards[m];
            const Vec3 euler = s.euler_rpy();
            OJson line{{"type", "uav"},
                       {"t", w.t},
                       {"uav", m},
                       {"pos", vec3(s.position_m)},
                       {"vel", vec3(s.velocity_mps)},
                       {"euler", vec3(euler)},
                       {"omega", vec3(s.angular_rate_radps)},
                       {"rpm", vec4(s.rotor_rpm)},
                       {"directive", session.agents[m].directive().to_string()},
                       {"telecom", actions[m].telecom.to_string()},
                       {"serving", w.serving[m]},
                       {"rate_bps", w.serving_links[m].rate_bps},
                       {"wr_bps", w.serving_links[m].weighted_rate_bps},
                       {"sinr", w.serving_links[m].sinr_linear},
                       {"r_tran", r.r_tran},
                       {"r_tele", r.r_tele},
                       {"c_safe", r.c_safe},
                       {"c_ho", r.c_ho},
                       {"handover", static_cast<bool>(w.handover[m])},
                       {"forced", static_cast<bool>(w.forced_handover[m])},
                       {"haps_load_bps", w.haps_load_bps},
                       {"violation", result.capacity_violation}};
            // Round-trip through text so live and re-derived sums see identical doubles.
            const std::string text = line.dump();
            acc.add(OJson::parse(text));
            if (out) {
                if (out->trajectory.is_open()) out->trajectory << text << '\n';
                const double deg = 180.0 / channel::kPi;
                out->timeseries << w.t << ',' << m << ',' << s.position_m.x() << ',' << s.position_m.y() << ','
                                << s.position_m.z() << ',' << s.velocity_mps.x() << ',' << s.velocity_mps.y() << ','
                                << s.velocity_mps.z() << ',' << euler.x() * deg << ',' << euler.y() * deg << ','
                                << euler.z() * deg << ',' << s.rotor_rpm[0] << ',' << s.rotor_rpm[1] << ','
                                << s.rotor_rpm[2] << ',' << s.rotor_rpm[3] << ','
                                << w.serving_links[m].rate_bps / 1e6 << ','
                                << w.serving_links[m].weighted_rate_bps / 1e6 << ',' << w.serving[m] << ','
                                << session.agents[m].directive().to_string().substr(10) << '\n';
            }
        }
        for (auto& a : session.agents) {
            for (const auto& d : a.take_degradations()) {
                ++extra.degradations;
                if (out) write_event(out->events, {d.t, "degradation", -1, -1, -1, d.tier + ": " + d.reason});
            }
            auto prompts = a.take_prompts();
            if (out && out->prompts.is_open()) {
                for (const auto& p : prompts) {
                    out->prompts << OJson{{"t", p.t}, {"tier", "uav"}, {"prompt", p.prompt}, {"reply", p.reply}}.dump()
                                 << '\n';
                }
            }
        }
        if (out) {
            for (const auto& e : result.events) write_event(out->events, e);
        }
        obs.swap(next);
    }
    for (auto& a : session.agents) a.flush_reflections();

    EpisodeSummary summary = acc.finish();
    summary.seed = seed;
    summary.num_uavs = count;
    summary.total_meta_reward = extra.total_meta_reward;
    summary.llm_gates = extra.llm_gates;
    summary.haps_gates = extra.haps_gates;
    summary.backend_calls = extra.backend_calls;
    summary.off_gate_backend_calls = extra.off_gate_backend_calls;
    summary.offload_sizes = extra.offload_sizes;
    summary.degradations = extra.degradations;
    summary.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return summary;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void write_summary_csv(const std::vector<EpisodeSummary>& rows, const std::vector<double>& losses,
                       const std::vector<double>& epsilons, const fs::path& path) {
    std::ofstream out(path);
    out << "episode,seed,steps,num_uavs,total_r_tran,total_r_tele,total_c_safe,total_c_ho,handovers,"
           "handover_probability,collision_events,collision_rate,capacity_violation_fraction,mean_datarate_mbps,"
           "total_meta_reward,mean_loss,epsilon,wall_clock_s\n";
    out.precision(10);
    for (std::size_t e = 0; e < rows.size(); ++e) {
        const auto& s = rows[e];
        out << e << ',' << s.seed << ',' << s.steps << ',' << s.num_uavs << ',' << s.total_r_tran << ','
            << s.total_r_tele << ',' << s.total_c_safe << ',' << s.total_c_ho << ',' << s.handovers << ','
            << s.handover_probability << ',' << s.collision_events << ',' << s.collision_rate << ','
            << s.capacity_violation_fraction << ',' << s.mean_datarate_mbps << ',' << s.total_meta_reward << ','
            << losses[e] << ',' << epsilons[e] << ',' << s.wall_clock_s << '\n';
    }
}

}  // namespace

bool EpisodeSummary::same_outcome(const EpisodeSummary& o) const {
    Json a = runner::to_json(*this);
    Json b = runner::to_json(o);
    a.erase("wall_clock_s");
    b.erase("wall_clock_s");
    return a == b;
}

Json to_json(const EpisodeSummary& s) {
    return {{"seed", s.seed},
            {"num_uavs", s.num_uavs},
            {"steps", s.steps},
            {"total_r_tran", s.total_r_tran},
            {"total_r_tele", s.total_r_tele},
            {"total_c_safe", s.total_c_safe},
            {"total_c_ho", s.total_c_ho},
            {"handovers", s.handovers},
            {"forced_handovers", s.forced_handovers},
            {"handover_probability", s.handover_probability},
            {"collision_events", s.collision_events},
            {"collision_rate", s.collision_rate},
            {"capacity_violation_steps", s.capacity_violation_steps},
            {"capacity_violation_fraction", s.capacity_violation_fraction},
            {"mean_datarate_mbps", s.mean_datarate_mbps},
            {"total_meta_reward", s.total_meta_reward},
            {"llm_gates", s.llm_gates},
            {"haps_gates", s.haps_gates},
            {"backend_calls", s.backend_calls},
            {"off_gate_backend_calls", s.off_gate_backend_calls},
            {"offload_sizes", s.offload_sizes},
            {"degradations", s.degradations},
            {"wall_clock_s", s.wall_clock_s}};
}

std::vector<EpisodeSummary> run(const ScenarioConfig& cfg, const RunOptions& options) {
    cfg.validate();
    if (options.episodes < 1) throw ConfigError("episodes: must be >= 1");
    Session session(cfg);
    std::vector<EpisodeSummary> out;
    std::vector<double> losses;
    std::vector<double> epsilons;
    for (int e = 0; e < options.episodes; ++e) {
        std::unique_ptr<Writers> writers;
        fs::path dir;
        if (!options.out_dir.empty()) {
            dir = options.episodes == 1 ? fs::path(options.out_dir)
                                        : fs::path(options.out_dir) / ("episode_" + std::to_string(e));
            writers = std::make_unique<Writers>(dir, cfg);
        }
        auto summary = run_one(session, cfg.seed + static_cast<std::uint64_t>(e), writers.get());
        double loss = 0.0;
        int n = 0;
        for (const auto& a : session.agents) {
            if (a.last_loss() >= 0.0) {
                loss += a.last_loss();
                ++n;
            }
        }
        losses.push_back(n ? loss / n : rl::DoubleDqn::kNoLoss);
        epsilons.push_back(session.agents.empty() ? 0.0 : session.agents.front().epsilon());
        if (writers) {
            std::ofstream(dir / "summary.json") << to_json(summary).dump(2) << '\n';
            if (e + 1 == options.episodes) {
                for (std::size_t m = 0; m < session.agents.size(); ++m) {
                    session.agents[m].memory().write_jsonl((dir / ("memory_uav" + std::to_string(m) + ".jsonl")).string());
                }
            }
        }
        out.push_back(summary);
    }
    if (!options.out_dir.empty()) {
        write_summary_csv(out, losses, epsilons, fs::path(options.out_dir) / "metrics.csv");
        save_config(cfg, (fs::path(options.out_dir) / "config.json").string());
    }
    return out;
}

EpisodeSummary run_episode(const ScenarioConfig& cfg, const std::string& out_dir) {
    return run(cfg, {out_dir, 1}).front();
}

EpisodeSummary summarize_trajectory(const std::string& jsonl_path) {
    std::ifstream in(jsonl_path);
    if (!in) throw std::runtime_error("cannot open " + jsonl_path);
    Accumulator acc;
    std::uint64_t seed = 0;
    int num_uavs = 0;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const OJson j = OJson::parse(line);
        if (j.value("type", "") == "episode") {
            seed = j["seed"].get<std::uint64_t>();
            num_uavs = j["num_uavs"].get<int>();
            continue;
        }
        acc.add(j);
    }
    EpisodeSummary s = acc.finish();
    s.seed = seed;
    if (num_uavs > 0) s.num_uavs = num_uavs;
    return s;
}

ScenarioConfig apply_variant(ScenarioConfig cfg, const std::string& variant) {
    if (variant == "full") return cfg;
    if (variant == "no-memory") {
        cfg.ablation.memory_prompt = false;
        return cfg;
    }
    if (variant == "no-meta") {
        cfg.ablation.meta_controller = false;
        return cfg;
    }
    throw ConfigError("variant: unknown ablation variant '" + variant + "'");
}

std::vector<SweepCell> run_sweep(const ScenarioConfig& cfg, const SweepOptions& options) {
    if (options.num_uavs.empty() || options.seeds.empty() || options.variants.empty()) {
        throw ConfigError("sweep: M list, seeds and variants must be nonempty");
    }
    std::vector<SweepCell> cells;
    for (const auto& v : options.variants) {
        apply_variant(cfg, v);
        for (int m : options.num_uavs) {
            for (auto seed : options.seeds) cells.push_back({v, m, seed, false, {}, {}});
        }
    }
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        // Cells are the unit of parallelism; keep kernels serial inside each worker.
        omp_set_num_threads(1);
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            auto& cell = cells[i];
            try {
                ScenarioConfig c = apply_variant(cfg, cell.variant);
                c.env.num_uavs = cell.num_uavs;
                c.seed = cell.seed;
                c.env.origins.clear();
                c.env.targets.clear();
                cell.summary = run_episode(c);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.error = e.what();
                std::lock_guard lock(log_mutex);
                log::error("sweep cell ", cell.variant, " M=", cell.num_uavs, " seed=", cell.seed, ": ", e.what());
            }
        }
    };
    const int workers = std::max(1, options.workers);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    if (!options.out_dir.empty()) {
        fs::create_directories(options.out_dir);
        write_sweep_csv(cells, (fs::path(options.out_dir) / "sweep.csv").string());
        std::ofstream raw(fs::path(options.out_dir) / "sweep_cells.csv");
        raw << "variant,M,seed,ok,transport_reward_per_uav,handover_probability,collision_rate,"
               "capacity_violation_fraction,mean_datarate_mbps,error\n";
        raw.precision(10);
        for (const auto& c : cells) {
            const auto& s = c.summary;
            raw << c.variant << ',' << c.num_uavs << ',' << c.seed << ',' << (c.ok ? 1 : 0) << ','
                << (c.ok ? s.total_r_tran / c.num_uavs : 0.0) << ',' << s.handover_probability << ','
                << s.collision_rate << ',' << s.capacity_violation_fraction << ',' << s.mean_datarate_mbps << ",\""
                << c.error << "\"\n";
        }
    }
    return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path) {
    std::map<std::pair<std::string, int>, std::vector<const SweepCell*>> groups;
    std::vector<std::pair<std::string, int>> order;
    for (const auto& c : cells) {
        const auto key = std::make_pair(c.variant, c.num_uavs);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(&c);
    }
    std::ofstream out(path);
    out << "variant,M,seeds,failed,transport_mean,transport_std,ho_prob_mean,ho_prob_std,collision_rate_mean,"
           "collision_rate_std,violation_mean,violation_std,datarate_mean,datarate_std\n";
    out.precision(10);
    for (const auto& key : order) {
        std::vector<double> tr, ho, col, vio, rate;
        int failed = 0;
        for (const auto* c : groups[key]) {
            if (!c->ok) {
                ++failed;
                continue;
            }
            tr.push_back(c->summary.total_r_tran / c->num_uavs);
            ho.push_back(c->summary.handover_probability);
            col.push_back(c->summary.collision_rate);
            vio.push_back(c->summary.capacity_violation_fraction);
            rate.push_back(c->summary.mean_datarate_mbps);
        }
        out << key.first << ',' << key.second << ',' << groups[key].size() << ',' << failed << ',' << mean_of(tr) << ','
            << std_of(tr) << ',' << mean_of(ho) << ',' << std_of(ho) << ',' << mean_of(col) << ',' << std_of(col) << ','
            << mean_of(vio) << ',' << std_of(vio) << ',' << mean_of(rate) << ',' << std_of(rate) << '\n';
    }
}

}  // namespace skyway::runner
