#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "infogap/config.hpp"
#include "infogap/error.hpp"
#include "infogap/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Common {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    bool force = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config_path, "JSON config file")->required();
    cmd->add_option("-o,--out", c.out, "Output directory (overrides the config)");
    cmd->add_option("--seed", c.seed, "Base seed (overrides the config)");
    cmd->add_option("--workers", c.workers, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
}

infogap::config::PipelineConfig load(const Common& c) {
    auto cfg = infogap::config::load_config(c.config_path);
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (c.seed) cfg.seed = *c.seed;
    if (c.workers) cfg.workers = *c.workers;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    namespace pl = infogap::pipeline;
    CLI::App app{"Curiosity vs topic-network topology pipeline"};
    app.set_version_flag("--version", std::string(pl::kToolVersion));
    app.require_subcommand(1);

    Common common;
    std::optional<pl::Stage> until;
    bool sweep = false;

    for (pl::Stage stage : pl::all_stages()) {
        auto* cmd = app.add_subcommand(pl::stage_name(stage), "Run the pipeline through the " + pl::stage_name(stage) +
                                                                  " stage");
        add_common(cmd, common);
        cmd->add_flag("--force", common.force, "Rerun stages even when the manifest says they are current");
        cmd->callback([&until, stage] { until = stage; });
    }
    auto* run_cmd = app.add_subcommand("run", "Run every stage");
    add_common(run_cmd, common);
    run_cmd->add_flag("--force", common.force, "Rerun stages even when the manifest says they are current");
    auto* sweep_cmd = app.add_subcommand("sweep", "Robustness sweep over embedders and window settings");
    add_common(sweep_cmd, common);
    sweep_cmd->callback([&sweep] { sweep = true; });

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load(common);
        if (sweep) {
            const auto table = pl::run_sweep(cfg);
            std::cout << table.to_string();
        } else {
            const auto result = pl::run(cfg, {until, common.force});
            for (const auto& s : result.reused) std::cerr << "reused " << s << "\n";
            for (const auto& s : result.ran) std::cerr << "ran " << s << "\n";
            std::cout << result.out_dir.string() << "\n";
        }
    } catch (const infogap::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const pl::StageError& e) {
        std::cerr << e.what() << "\n";
        return kExitStage;
    } catch (const infogap::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
    return EXIT_SUCCESS;
}
