#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "infogap/config.hpp"
#include "infogap/error.hpp"
#include "infogap/homology.hpp"
#include "infogap/network.hpp"
#include "infogap/util.hpp"

namespace infogap::pipeline {

inline constexpr const char* kToolVersion = "0.3.0";

enum class Stage { segment, embed, reduce, cluster, network, homology, distances, features, fit, report };

const std::vector<Stage>& all_stages();
std::string stage_name(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);

// A stage threw; partial artifacts and the manifest up to the previous stage
// are kept.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct RunOptions {
    std::optional<Stage> until;  // last stage to run; all by default
    bool force = false;          // ignore the manifest and rerun everything
};

struct RunResult {
    std::filesystem::path out_dir;
    std::vector<std::string> ran;
    std::vector<std::string> reused;
};

// Runs stages in order. A stage is reused when the manifest shows the same
// parameters, the same input hashes and intact outputs, and no earlier stage
// ran in this invocation.
RunResult run(const config::PipelineConfig& cfg, const RunOptions& options = {});

// One pipeline per (embedder, window) cell under <output_dir>/sweep/, run
// through the fit stage; a failing cell is recorded and the sweep continues.
util::Table run_sweep(const config::PipelineConfig& cfg);

// Snapshot series as stored in network_series.tsv (additions per chapter).
util::Table series_table(const network::TopicGraphSeries& series);
network::TopicGraphSeries parse_series(const util::Table& table);

util::Table diagrams_table(const std::vector<std::vector<homology::PersistenceDiagram>>& per_chapter);

}  // namespace infogap::pipeline
