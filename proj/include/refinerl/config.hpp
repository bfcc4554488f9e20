#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "refinerl/env.hpp"
#include "refinerl/policy.hpp"
#include "refinerl/scheduler.hpp"

namespace rfl {

// Usage and configuration problems; the CLI maps these to exit code 1 and
// everything else to 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    TaskSpec task;
    std::string problems_file;
    PolicyDims policy;
    double init_scale = 0.1;
    TrainConfig train;
    EvalSchedule eval;
    std::string output_dir = "runs/out";

    uint64_t master_seed() const { return train.master_seed; }
};

// Strict parsing: unknown keys are rejected by name, missing keys fall back
// to defaults. parse(serialize(parse(text))) == parse(text).
RunConfig parse_run_config(const nlohmann::ordered_json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::ordered_json serialize_run_config(const RunConfig& cfg);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

// Dotted-path override for CLI flags, e.g. "train.update.learning_rate=0.3".
// The value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::ordered_json& j, const std::string& assignment);

}  // namespace rfl
