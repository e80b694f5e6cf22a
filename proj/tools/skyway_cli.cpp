#include "skyway/config.hpp"
#include "skyway/log.hpp"
#include "skyway/physics.hpp"
#include "skyway/plot.hpp"
#include "skyway/runner.hpp"

#include <CLI11.hpp>

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFault = 3;

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<std::string> overrides;
    std::string backend;
    std::string out = "out";
    int workers = 0;
    bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "scenario JSON file (defaults if omitted)");
    cmd->add_option("--seed", c.seed, "root seed")->each([&c](const std::string&) { c.seed_set = true; });
    cmd->add_option("--override", c.overrides, "dotted.key=value, repeatable");
    cmd->add_option("--backend", c.backend, "rule | mock | llm")->check(CLI::IsMember({"rule", "mock", "llm"}));
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--workers", c.workers, "thread limit");
    cmd->add_flag("-v,--verbose", c.verbose, "info-level logging");
}

skyway::ScenarioConfig build_config(const Common& c) {
    skyway::Json doc;
    if (c.config.empty()) {
        doc = skyway::to_json(skyway::ScenarioConfig{});
    } else {
        std::ifstream in(c.config);
        if (!in) throw skyway::ConfigError("--config: cannot open " + c.config);
        doc = skyway::Json::parse(in, nullptr, false);
        if (doc.is_discarded()) throw skyway::ConfigError("--config: " + c.config + " is not valid JSON");
    }
    doc = skyway::apply_overrides(std::move(doc), c.overrides);
    if (c.seed_set) doc["seed"] = c.seed;
    if (!c.backend.empty()) doc["backend"]["mode"] = c.backend;
    auto cfg = skyway::scenario_from_json(doc);
    cfg.validate();
    return cfg;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skyway: hierarchical UAV flight and network-association simulator"};
    app.require_subcommand(1);

    Common common;
    int episodes = 1;
    auto* run = app.add_subcommand("run", "run one or more episodes and write logs");
    add_common(run, common);
    run->add_option("--episodes", episodes, "episodes with persistent agents")->check(CLI::PositiveNumber);

    std::string m_list = "5,10,15,20,25,30";
    std::string seed_list = "1,2,3";
    std::vector<std::string> variants{"full", "no-memory", "no-meta"};
    auto* sweep = app.add_subcommand("sweep", "fleet-size x seed x ablation sweep");
    add_common(sweep, common);
    sweep->add_option("--m-list", m_list, "comma-separated fleet sizes");
    sweep->add_option("--seeds", seed_list, "comma-separated seeds");
    sweep->add_option("--variants", variants, "ablation variants");

    std::vector<std::string> csvs;
    std::string plot_out = "plots";
    auto* plot = app.add_subcommand("plot", "render SVG figures from run or sweep CSVs");
    plot->add_option("csv", csvs, "CSV files")->required();
    plot->add_option("--out", plot_out, "output directory");

    auto* validate = app.add_subcommand("validate-config", "check a scenario file");
    add_common(validate, common);

    std::string dump_path;
    auto* dump = app.add_subcommand("dump-defaults", "print the default scenario");
    dump->add_option("--out", dump_path, "write to a file instead of stdout");

    CLI11_PARSE(app, argc, argv);
    if (common.verbose) skyway::log::set_level(skyway::log::Level::info);
    if (common.workers > 0) omp_set_num_threads(common.workers);

    try {
        if (*run) {
            const auto cfg = build_config(common);
            const auto summaries = skyway::runner::run(cfg, {common.out, episodes});
            for (const auto& s : summaries) std::cout << skyway::runner::to_json(s).dump() << '\n';
            return 0;
        }
        if (*sweep) {
            const auto cfg = build_config(common);
            skyway::runner::SweepOptions opt;
            opt.num_uavs = parse_ints(m_list);
            opt.seeds.clear();
            for (int s : parse_ints(seed_list)) opt.seeds.push_back(static_cast<std::uint64_t>(s));
            opt.variants = variants;
            opt.workers = common.workers > 0 ? common.workers : static_cast<int>(std::thread::hardware_concurrency());
            opt.out_dir = common.out;
            const auto cells = skyway::runner::run_sweep(cfg, opt);
            int failed = 0;
            for (const auto& c : cells) failed += c.ok ? 0 : 1;
            std::cout << cells.size() << " cells, " << failed << " failed; wrote " << common.out << "/sweep.csv\n";
            return 0;
        }
        if (*plot) {
            for (const auto& path : skyway::plot::emit_plots(csvs, plot_out)) std::cout << path << '\n';
            return 0;
        }
        if (*validate) {
            build_config(common);
            std::cout << "ok\n";
            return 0;
        }
        if (*dump) {
            const std::string text = skyway::to_json(skyway::ScenarioConfig{}).dump(2) + "\n";
            if (dump_path.empty()) {
                std::cout << text;
            } else {
                std::ofstream(dump_path) << text;
            }
            return 0;
        }
    } catch (const skyway::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const skyway::plot::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const skyway::SimulationFault& e) {
        std::cerr << "simulation fault: " << e.what() << '\n';
        return kExitFault;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
