#include "skyway/kernels.hpp"
#include "skyway/runner.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace skyway;

namespace {

std::vector<Vec3> fleet(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> xy(0.0, 1000.0), z(100.0, 300.0);
    std::vector<Vec3> out;
    for (int i = 0; i < n; ++i) out.emplace_back(xy(rng), xy(rng), z(rng));
    return out;
}

std::vector<physics::RigidBodyState> states_for(const std::vector<Vec3>& pos, const physics::UavParams& p) {
    std::vector<physics::RigidBodyState> s(pos.size());
    const double hover = physics::hover_rpm(p);
    for (std::size_t i = 0; i < pos.size(); ++i) {
        s[i].position_m = pos[i];
        s[i].rotor_rpm = Vec4::Constant(hover);
    }
    return s;
}

template <bool Parallel>
void BM_MinSeparation(benchmark::State& state) {
    const auto pos = fleet(static_cast<int>(state.range(0)), 1);
    for (auto _ : state) {
        auto r = Parallel ? kernels::min_separation_parallel(pos) : kernels::min_separation_serial(pos);
        benchmark::DoNotOptimize(r);
    }
}

template <bool Parallel>
void BM_TbsLinks(benchmark::State& state) {
    const auto pos = fleet(static_cast<int>(state.range(0)), 2);
    std::vector<channel::TbsConfig> tbs(4);
    tbs[1].position_m = {1000, 0, 25};
    tbs[2].position_m = {0, 1000, 25};
    tbs[3].position_m = {1000, 1000, 25};
    const channel::NoiseModel noise;
    const channel::PathLossModel model;
    for (auto _ : state) {
        auto r = Parallel ? kernels::tbs_links_parallel(pos, tbs, noise, model)
                          : kernels::tbs_links_serial(pos, tbs, noise, model);
        benchmark::DoNotOptimize(r);
    }
}

template <bool Parallel>
void BM_PhysicsStep(benchmark::State& state) {
    const physics::UavParams params;
    const auto s = states_for(fleet(static_cast<int>(state.range(0)), 3), params);
    const std::vector<Vec4> cmd(s.size(), Vec4::Constant(physics::hover_rpm(params) * 1.01));
    const physics::IntegratorConfig integ;
    for (auto _ : state) {
        auto r = Parallel ? kernels::physics_step_parallel(s, cmd, params, integ)
                          : kernels::physics_step_serial(s, cmd, params, integ);
        benchmark::DoNotOptimize(r);
    }
}

template <bool Parallel>
void BM_EmbeddingDistances(benchmark::State& state) {
    const std::size_t rows = static_cast<std::size_t>(state.range(0));
    const std::size_t dim = 11;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> data(rows * dim), query(dim);
    for (auto& v : data) v = u(rng);
    for (auto& v : query) v = u(rng);
    for (auto _ : state) {
        auto r = Parallel ? kernels::euclidean_distances_parallel(query, data, dim)
                          : kernels::euclidean_distances_serial(query, data, dim);
        benchmark::DoNotOptimize(r);
    }
}

void BM_Episode(benchmark::State& state) {
    ScenarioConfig cfg;
    cfg.env.num_uavs = static_cast<int>(state.range(0));
    cfg.env.horizon_steps = 200;
    cfg.output.trajectory_log = false;
    for (auto _ : state) {
        auto s = runner::run_episode(cfg);
        benchmark::DoNotOptimize(s);
    }
}

}  // namespace

BENCHMARK(BM_MinSeparation<false>)->Arg(30)->Arg(300)->Arg(3000);
BENCHMARK(BM_MinSeparation<true>)->Arg(30)->Arg(300)->Arg(3000);
BENCHMARK(BM_TbsLinks<false>)->Arg(30)->Arg(1000);
BENCHMARK(BM_TbsLinks<true>)->Arg(30)->Arg(1000);
BENCHMARK(BM_PhysicsStep<false>)->Arg(30)->Arg(1000);
BENCHMARK(BM_PhysicsStep<true>)->Arg(30)->Arg(1000);
BENCHMARK(BM_EmbeddingDistances<false>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_EmbeddingDistances<true>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_Episode)->Arg(5)->Arg(30)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
