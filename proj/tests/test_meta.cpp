#include "oracles.hpp"
#include "skyway/env.hpp"
#include "skyway/meta_controller.hpp"
#include "skyway/policy.hpp"

#include <doctest.h>

#include <random>

using namespace skyway;
using namespace skyway::meta;

namespace {

// m users on the HAPS at equal full-band SNR, weighted rates distinct.
Snapshot crowd(int m, double snr = 3.4) {
    channel::HapsConfig h;
    Snapshot s;
    s.capacity_bps = h.capacity_limit_bps;
    s.quota = h.quota;
    std::vector<double> snrs(m, snr);
    s.load_bps = oracle::equal_split_load(snrs, h.total_bandwidth_hz);
    for (int i = 0; i < m; ++i) {
        UavEntry u;
        u.id = i;
        u.on_haps = true;
        u.full_band_snr = snr;
        u.weighted_rate_bps = 1e6 * (10.0 + (i * 7) % m);
        s.uavs.push_back(u);
    }
    return s;
}

class Reply : public cognition::SemanticPolicy {
public:
    explicit Reply(std::string r) : r_(std::move(r)) {}

protected:
    std::optional<std::string> do_complete(const cognition::PolicyRequest&) override { return r_; }

private:
    std::string r_;
};

}  // namespace

TEST_SUITE("meta") {

TEST_CASE("offload cardinality") {
    channel::HapsConfig h;
    CHECK(rule_decide(crowd(4), h).kind == env::MetaKind::Idle);
    const auto seven = rule_decide(crowd(7), h);
    CHECK(seven.kind == env::MetaKind::Offload);
    CHECK(seven.uav_ids.size() == 2);
    CHECK(rule_decide(crowd(10), h).uav_ids.size() == 5);
}

TEST_CASE("offload picks the lowest weighted rates, ties by id") {
    channel::HapsConfig h;
    auto s = crowd(7);
    for (auto& u : s.uavs) u.weighted_rate_bps = 5e6;
    s.uavs[6].weighted_rate_bps = 1e6;
    const auto a = rule_decide(s, h);
    CHECK(a.uav_ids == std::vector<int>{6, 0});
}

TEST_CASE("capacity binds before quota") {
    channel::HapsConfig h;
    auto s = crowd(4, 4000.0);
    REQUIRE(s.load_bps > s.capacity_bps);
    const auto a = rule_decide(s, h);
    CHECK(a.kind == env::MetaKind::Offload);
    auto after = s;
    std::vector<double> left;
    for (auto& u : after.uavs) {
        if (std::find(a.uav_ids.begin(), a.uav_ids.end(), u.id) == a.uav_ids.end()) left.push_back(u.full_band_snr);
    }
    CHECK(oracle::equal_split_load(left, h.total_bandwidth_hz) <= h.capacity_limit_bps);
    // One fewer would not have been enough.
    left.push_back(4000.0);
    CHECK(oracle::equal_split_load(left, h.total_bandwidth_hz) > h.capacity_limit_bps);
}

TEST_CASE("post-offload feasibility on random crowds") {
    channel::HapsConfig h;
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> count(1, 15);
    std::uniform_real_distribution<double> snr(0.5, 50.0), wr(1e5, 2e7);
    for (int trial = 0; trial < 200; ++trial) {
        Snapshot s;
        s.capacity_bps = h.capacity_limit_bps;
        s.quota = h.quota;
        std::vector<double> snrs;
        const int m = count(rng);
        for (int i = 0; i < m; ++i) {
            UavEntry u{i, true, false, wr(rng), snr(rng)};
            s.uavs.push_back(u);
            snrs.push_back(u.full_band_snr);
        }
        s.load_bps = oracle::equal_split_load(snrs, h.total_bandwidth_hz);
        const auto a = rule_decide(s, h);
        CHECK(validate(a, s, h).empty());
        std::vector<double> left;
        for (const auto& u : s.uavs) {
            if (std::find(a.uav_ids.begin(), a.uav_ids.end(), u.id) == a.uav_ids.end()) left.push_back(u.full_band_snr);
        }
        CHECK(static_cast<int>(left.size()) <= h.quota);
        if (!left.empty()) CHECK(oracle::equal_split_load(left, h.total_bandwidth_hz) <= h.capacity_limit_bps);
    }
}

TEST_CASE("recall respects both limits") {
    channel::HapsConfig h;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> snr(0.5, 200.0);
    std::uniform_int_distribution<int> on(0, 5), off(1, 6);
    for (int trial = 0; trial < 200; ++trial) {
        Snapshot s;
        s.capacity_bps = h.capacity_limit_bps;
        s.quota = h.quota;
        const int n_on = on(rng), n_off = off(rng);
        std::vector<double> current;
        for (int i = 0; i < n_on + n_off; ++i) {
            UavEntry u{i, i < n_on, i >= n_on, 1e6, snr(rng)};
            if (u.on_haps) current.push_back(u.full_band_snr);
            s.uavs.push_back(u);
        }
        s.load_bps = current.empty() ? 0.0 : oracle::equal_split_load(current, h.total_bandwidth_hz);
        const auto a = rule_decide(s, h);
        if (a.kind != env::MetaKind::Recall) continue;
        CHECK(validate(a, s, h).empty());
        auto after = current;
        for (int id : a.uav_ids) after.push_back(s.uavs[id].full_band_snr);
        CHECK(static_cast<int>(after.size()) <= h.quota);
        CHECK(oracle::equal_split_load(after, h.total_bandwidth_hz) <= h.capacity_limit_bps);
    }
}

TEST_CASE("recall order is by descending snr") {
    channel::HapsConfig h;
    Snapshot s;
    s.capacity_bps = h.capacity_limit_bps;
    s.quota = h.quota;
    s.uavs = {{0, false, true, 0.0, 2.0}, {1, false, true, 0.0, 9.0}, {2, false, true, 0.0, 5.0}};
    const auto a = rule_decide(s, h);
    REQUIRE(a.kind == env::MetaKind::Recall);
    CHECK(a.uav_ids.front() == 1);
}

TEST_CASE("no thrash at a fixed point") {
    channel::HapsConfig h;
    const auto s = crowd(3);
    for (int gate = 0; gate < 10; ++gate) CHECK(rule_decide(s, h).kind == env::MetaKind::Idle);
}

TEST_CASE("validation rejects infeasible actions") {
    channel::HapsConfig h;
    const auto s = crowd(7);
    CHECK_FALSE(validate({env::MetaKind::Offload, {0}}, s, h).empty());
    CHECK_FALSE(validate({env::MetaKind::Recall, {0}}, s, h).empty());
    CHECK_FALSE(validate({env::MetaKind::Offload, {0, 0, 1}}, s, h).empty());
    CHECK_FALSE(validate({env::MetaKind::Offload, {42, 1}}, s, h).empty());
    CHECK(validate({env::MetaKind::Offload, {0, 1}}, s, h).empty());
}

TEST_CASE("meta reward") {
    ScenarioConfig cfg;
    env::WorldState w;
    w.uavs.resize(3);
    w.serving_links.resize(3);
    w.handover.assign(3, false);
    for (int m = 0; m < 3; ++m) w.serving_links[m].weighted_rate_bps = 2e6 * (m + 1);
    CHECK(meta_reward(w, cfg) == doctest::Approx(12.0));
    w.haps_load_bps = 2e8;
    CHECK(meta_reward(w, cfg) == doctest::Approx(12.0 - 50.0));
    w.haps_load_bps = 0.0;
    w.handover.assign(3, true);
    CHECK(meta_reward(w, cfg) == doctest::Approx(12.0 - 15.0));
}

TEST_CASE("controller in policy mode") {
    ScenarioConfig cfg;
    cfg.env.num_uavs = 7;
    cfg.env.initial_association = "haps";
    env::Environment e(cfg);
    e.reset(1);
    const auto obs = e.observe_haps();

    MetaController rule(cfg, nullptr, false);
    const auto r = rule.decide(obs);
    CHECK(r.action.kind == env::MetaKind::Offload);
    CHECK_FALSE(r.from_policy);

    cognition::MockPolicy mock("heuristic", cfg.network.haps);
    MetaController llm(cfg, &mock, true);
    const auto m = llm.decide(obs);
    CHECK(m.from_policy);
    CHECK(m.action.uav_ids == r.action.uav_ids);
    CHECK(m.prompt.find("### OBSERVATION") != std::string::npos);

    Reply bad("ACTION Recall 0");
    MetaController wrong(cfg, &bad, true);
    const auto w = wrong.decide(obs);
    CHECK(w.degraded);
    CHECK(w.action.uav_ids == r.action.uav_ids);

    llm.observe(obs, m.action, -60.0, obs);
    CHECK(llm.memory().size() == 1);
    CHECK_FALSE(llm.memory().at(0).correction.empty());
    llm.observe(obs, m.action, 5.0, obs);
    CHECK(llm.memory().at(1).correction.empty());
}

}
