#include "oracles.hpp"
#include "skyway/cognition.hpp"
#include "skyway/policy.hpp"

#include <doctest.h>

#include <random>

using namespace skyway;
using namespace skyway::cognition;

namespace {

class ScriptedPolicy : public SemanticPolicy {
public:
    explicit ScriptedPolicy(std::vector<std::optional<std::string>> replies) : replies_(std::move(replies)) {}
    std::vector<std::string> prompts;

protected:
    std::optional<std::string> do_complete(const PolicyRequest& r) override {
        prompts.push_back(r.prompt);
        if (replies_.empty()) return std::nullopt;
        auto out = replies_.front();
        replies_.erase(replies_.begin());
        return out;
    }

private:
    std::vector<std::optional<std::string>> replies_;
};

MemoryRecord record_with(Eigen::VectorXd e) {
    MemoryRecord r;
    r.embedding = std::move(e);
    r.action = "DIRECTIVE HOVER";
    r.reward = {0.0, 0.0, 0.0, 0.0};
    return r;
}

env::LocalObservation sample_obs() {
    env::LocalObservation o;
    o.uav = 2;
    o.t = 40;
    o.position_m = {100, 100, 150};
    o.target_m = {105, 100, 150};
    o.serving_node = 1;
    o.serving_sinr_linear = 50.0;
    o.node_sinr_linear = {50.0, 3.0, 1.0, 0.5, 4.0};
    return o;
}

}  // namespace

TEST_SUITE("cognition") {

TEST_CASE("directive grammar round trip") {
    for (int d = 0; d < kNumDirectives; ++d) {
        for (int m = -1; m < kNumMagnitudes; ++m) {
            SemanticDirective s{static_cast<Directive>(d), std::nullopt};
            if (m >= 0) s.magnitude = static_cast<Magnitude>(m);
            const auto back = SemanticDirective::parse(s.to_string());
            REQUIRE(back.has_value());
            CHECK(*back == s);
        }
    }
    CHECK(SemanticDirective::parse("\n  DIRECTIVE FORWARD NORMAL\nsome chatter")->token == Directive::Forward);
    CHECK_FALSE(SemanticDirective::parse("directive forward").has_value());
    CHECK_FALSE(SemanticDirective::parse("DIRECTIVE JUMP").has_value());
    CHECK_FALSE(SemanticDirective::parse("DIRECTIVE HOVER GENTLE EXTRA").has_value());
    CHECK_FALSE(SemanticDirective::parse("").has_value());
}

TEST_CASE("meta action grammar") {
    env::MetaAction a{env::MetaKind::Offload, {3, 1}};
    const auto back = parse_meta_action(format_meta_action(a));
    REQUIRE(back.has_value());
    CHECK(back->kind == env::MetaKind::Offload);
    CHECK(back->uav_ids == std::vector<int>{3, 1});
    CHECK(parse_meta_action("ACTION Idle")->kind == env::MetaKind::Idle);
    CHECK_FALSE(parse_meta_action("ACTION Idle 3").has_value());
    CHECK_FALSE(parse_meta_action("ACTION Offload").has_value());
    CHECK_FALSE(parse_meta_action("ACTION Recall x").has_value());
    CHECK_FALSE(parse_meta_action("Offload 1").has_value());
}

TEST_CASE("prompt composition is byte exact") {
    const auto p = PromptBundle::compose("S", "D", "M");
    CHECK(p.rendered == "S\n### OBSERVATION\nD\n### MEMORY\nM");
}

TEST_CASE("binning and phrases") {
    DiscretizeConfig c;
    CHECK(bin_label(5.0, c.distance_edges_m, c.distance_labels) == "VERY_CLOSE");
    CHECK(bin_label(10.0, c.distance_edges_m, c.distance_labels) == "CLOSE");
    CHECK(bin_label(1e6, c.distance_edges_m, c.distance_labels) == "VERY_FAR");
    CHECK(bin_label(0.0, c.load_edges, c.load_labels) == "LOW");
    CHECK(bin_label(0.95, c.load_edges, c.load_labels) == "SATURATED");
    CHECK(bearing_phrase({10, 0, 0}, 0.0) == "ahead");
    CHECK(bearing_phrase({0, 0, 10}, 0.0) == "overhead");
    CHECK(bearing_phrase({-10, 0, 0}, 0.0) != "ahead");
    CHECK(vertical_phrase(0.5, 2.0) == "level");
    CHECK(vertical_phrase(5.0, 2.0) != vertical_phrase(-5.0, 2.0));
}

TEST_CASE("discretized observation") {
    DiscretizeConfig c;
    auto o = sample_obs();
    const auto text = discretize(o, c);
    CHECK(text.find("distance=VERY_CLOSE") != std::string::npos);
    CHECK(text.find("NEIGHBORS: none") != std::string::npos);
    CHECK(discretize(o, c) == text);
    o.neighbors.push_back({7, Vec3(30, 0, 0), Vec3::Zero()});
    o.neighbors.push_back({4, Vec3(3, 0, 0), Vec3::Zero()});
    const auto with = discretize(o, c);
    CHECK(with.find("NEIGHBOR 4") < with.find("NEIGHBOR 7"));

    env::HapsObservation h;
    h.capacity_limit_bps = 100e6;
    h.remaining_capacity_bps = 100e6;
    h.quota = 5;
    CHECK(discretize(h, c).find("LOAD: LOW") != std::string::npos);
}

TEST_CASE("embedding") {
    Embedder e({0.0, -1.0}, {10.0, 1.0});
    CHECK(e.embed({0.0, -1.0}).norm() == 0.0);
    CHECK(e.embed({5.0, 0.0}) == e.embed({5.0, 0.0}));
    const auto wide = e.embed({20.0, 0.0});
    CHECK(wide[0] == 1.0);
    CHECK(e.upper()[0] == 20.0);
    CHECK(e.normalize({40.0, 5.0}).maxCoeff() <= 1.0);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    Embedder iso({0.0, 0.0, 0.0}, {10.0, 10.0, 10.0});
    for (int i = 0; i < 100; ++i) {
        std::vector<double> q{u(rng), u(rng), u(rng)}, a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
        auto dist = [](const std::vector<double>& x, const std::vector<double>& y) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
            return s;
        };
        const bool raw = dist(q, a) < dist(q, b);
        const bool scaled = (iso.normalize(q) - iso.normalize(a)).norm() < (iso.normalize(q) - iso.normalize(b)).norm();
        CHECK(raw == scaled);
    }
}

TEST_CASE("memory ring evicts oldest") {
    MemoryBuffer mem(3);
    for (int i = 0; i < 5; ++i) mem.push(record_with(Eigen::VectorXd::Constant(2, i)));
    CHECK(mem.size() == 3);
    CHECK(mem.at(0).sequence == 2);
    CHECK(mem.at(2).sequence == 4);
    CHECK_FALSE(mem.set_correction(0, "x"));
    CHECK(mem.set_correction(3, "fix"));
    CHECK(mem.at(1).correction == "fix");
    const auto got = retrieve_top_k(mem, Eigen::VectorXd::Zero(2), 10);
    CHECK(got.size() == 3);
    for (const auto& r : got) CHECK(r.record->sequence >= 2);
}

TEST_CASE("retrieval fixtures") {
    MemoryBuffer mem(100);
    for (int i = 0; i < 10; ++i) mem.push(record_with(Eigen::Vector2d(i, 0)));
    CHECK(retrieve_top_k(mem, Eigen::Vector2d(3, 0), 0).empty());
    const auto r = retrieve_top_k(mem, Eigen::Vector2d(3, 0), 1);
    CHECK(r[0].record->sequence == 3);
    CHECK(r[0].distance == 0.0);
    mem.push(record_with(Eigen::Vector2d(3, 0)));
    CHECK(retrieve_top_k(mem, Eigen::Vector2d(3, 0), 1)[0].record->sequence == 10);
}

TEST_CASE("retrieval matches an exhaustive sort") {
    std::mt19937_64 rng(17);
    for (int fixture = 0; fixture < 20; ++fixture) {
        std::uniform_int_distribution<int> nd(1, 3000), kd(0, 10), dd(1, 8), coarse(0, 3);
        const int n = nd(rng), k = kd(rng), dim = dd(rng);
        MemoryBuffer mem(static_cast<std::size_t>(n));
        std::vector<std::vector<double>> rows;
        std::vector<std::uint64_t> seq;
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd e(dim);
            for (int j = 0; j < dim; ++j) e[j] = coarse(rng) / 3.0;
            mem.push(record_with(e));
            rows.emplace_back(e.data(), e.data() + dim);
            seq.push_back(static_cast<std::uint64_t>(i));
        }
        std::vector<double> q(dim);
        for (auto& v : q) v = coarse(rng) / 3.0;
        const auto got = retrieve_top_k(mem, Eigen::Map<Eigen::VectorXd>(q.data(), dim), k);
        const auto want = oracle::nearest_by_sort(rows, seq, q, k);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i].record->sequence == seq[want[i]]);
    }
}

TEST_CASE("memory rendering") {
    CHECK(render_memory({}) == "none");
    MemoryRecord r = record_with(Eigen::Vector2d(0, 0));
    r.situation = "t=0";
    r.correction = "keep away";
    const auto text = render_exemplar(r);
    CHECK(text.find("SITUATION") != std::string::npos);
    CHECK(text.find("LESSON: keep away") != std::string::npos);
}

TEST_CASE("reflection gating") {
    MockPolicy mock;
    auto quiet = reflect("s", "a", {0, 0, 0, -5}, -5.0, -10.0, mock);
    CHECK_FALSE(quiet.triggered);
    CHECK(quiet.correction.empty());
    CHECK(mock.calls() == 0);
    auto crash = reflect("s", "DIRECTIVE FORWARD", {0.2, 0, -100, 0}, -150.0, -10.0, mock);
    CHECK(crash.triggered);
    CHECK_FALSE(crash.correction.empty());
    CHECK(crash.correction == reflect("s", "DIRECTIVE FORWARD", {0.2, 0, -100, 0}, -150.0, -10.0, mock).correction);

    ScriptedPolicy down({std::nullopt});
    auto fb = reflect("s", "a", {0, 0, -100, 0}, -100.0, -10.0, down);
    CHECK(fb.degraded);
    CHECK(fb.correction == kReflectionFallback);
}

TEST_CASE("semantic decisions with retries and fallbacks") {
    MockPolicy always("always:FORWARD");
    const auto p = PromptBundle::compose(uav_static_prompt(0), discretize(sample_obs(), {}), "none");
    CHECK(semantic_decide_uav(always, p).directive.token == Directive::Forward);

    ScriptedPolicy garbage({std::string("hello"), std::string("still no")});
    auto d = semantic_decide_uav(garbage, p);
    CHECK(d.directive.token == Directive::Hover);
    CHECK(d.degraded);
    CHECK(d.attempts == 2);
    CHECK(garbage.prompts[1].ends_with(kUavFormatReminder));

    ScriptedPolicy second({std::string("bad"), std::string("DIRECTIVE ASCEND GENTLE")});
    d = semantic_decide_uav(second, p);
    CHECK(d.directive.token == Directive::Ascend);
    CHECK_FALSE(d.degraded);

    ScriptedPolicy offline({});
    CHECK(semantic_decide_uav(offline, p).directive.token == Directive::Hover);
    CHECK_FALSE(semantic_decide_haps(offline, p).action.has_value());
}

TEST_CASE("fallback safety over many calls") {
    ScriptedPolicy offline({});
    const auto p = PromptBundle::compose("s", "d", "m");
    for (int i = 0; i < 10000; ++i) REQUIRE(semantic_decide_uav(offline, p).directive.token == Directive::Hover);
}

TEST_CASE("mock haps offloads the lowest-rate users when saturated") {
    env::HapsObservation h;
    h.capacity_limit_bps = 100e6;
    h.quota = 5;
    const int m = 7;
    h.num_haps_users = m;
    for (int i = 0; i < m; ++i) {
        h.on_haps.push_back(true);
        h.offloaded.push_back(false);
        h.serving_node.push_back(4);
        h.weighted_rate_bps.push_back(3e6 + 1e5 * ((i * 3) % 7));
        h.rate_bps.push_back(h.weighted_rate_bps.back() * 5);
        h.full_band_snr.push_back(4.0);
        h.distance_m.push_back(2e4);
        h.haps_load_bps += h.rate_bps.back();
    }
    h.remaining_capacity_bps = std::max(0.0, h.capacity_limit_bps - h.haps_load_bps);
    MockPolicy mock;
    const auto prompt = PromptBundle::compose(haps_static_prompt(), discretize(h, {}), "none");
    const auto d = semantic_decide_haps(mock, prompt);
    REQUIRE(d.action.has_value());
    CHECK(d.action->kind == env::MetaKind::Offload);
    // Rates 3.0 + 0.1*{0,3,6,2,5,1,4}: the two lowest are UAVs 0 and 5.
    std::vector<int> ids = d.action->uav_ids;
    std::sort(ids.begin(), ids.end());
    CHECK(ids == std::vector<int>{0, 5});
}

TEST_CASE("http policy wire format") {
    const auto body = HttpPolicy::request_body("m", "hi", 0.0);
    CHECK(body["model"] == "m");
    CHECK(body["messages"][0]["content"] == "hi");
    CHECK(body["stream"] == false);
    CHECK(HttpPolicy::extract_content(R"({"message":{"content":"DIRECTIVE HOVER"}})") == "DIRECTIVE HOVER");
    CHECK(HttpPolicy::extract_content(R"({"choices":[{"message":{"content":"x"}}]})") == "x");
    CHECK_FALSE(HttpPolicy::extract_content("not json").has_value());

    BackendConfig cfg;
    cfg.url = "http://127.0.0.1:9/api/chat";
    cfg.timeout_ms = 200;
    HttpPolicy http(cfg);
    CHECK_FALSE(http.complete({Tier::Uav, "x"}).has_value());
}

}
