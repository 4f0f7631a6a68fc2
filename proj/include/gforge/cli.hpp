#pragma once
// Batch front-end: pipeline configuration, subcommand dispatch, artifact
// naming. main() is a thin wrapper over run_cli so tests can drive the real
// command path in-process.

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "gforge/environment.hpp"
#include "gforge/inference.hpp"
#include "gforge/io.hpp"
#include "gforge/training.hpp"

namespace gforge {

struct PipelineConfig {
    std::string env_kind = "chain-arith";  // chain-arith | grid-plan | profile
    ChainArithConfig arith;
    GridPlanConfig grid;
    ProfileConfig profile;

    int n_train = 200;
    int n_test = 100;

    int context_buckets = 64;
    int policy_max_len = 0;  // 0 = environment default

    int sft_examples = 6;
    int sft_max_guidance_len = 0;  // 0 = take expert demos of any length
    TrainConfig sft;
    TrainConfig dpo;

    IgoOptions collect;
    int iterations = 3;

    InferenceConfig infer;

    uint64_t seed = 42;
    std::string hash;  // canonical config digest, filled at load time

    void validate() const;
};

// Strict parse: unknown or malformed keys raise ConfigError.
PipelineConfig pipeline_config_from(const std::map<std::string, std::string>& values);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

std::unique_ptr<Environment> make_environment(const PipelineConfig& config);

struct SubcommandArgs {
    std::filesystem::path out_dir = "out";
    std::optional<uint64_t> seed;  // overrides the config seed
    std::filesystem::path checkpoint;
    std::filesystem::path dataset;
    std::string split = "";  // "train" or "test"
    std::optional<int> iterations;
};

// Executes one subcommand against a loaded config; returns a process exit
// status (0 ok, 1 pipeline failure, 2 usage/config failure) and prints a
// one-line JSON summary on success.
int run_subcommand(const std::string& name, PipelineConfig config, const SubcommandArgs& args);

// Full argv path: parses flags, loads the config, dispatches.
int run_cli(int argc, const char* const* argv);

}  // namespace gforge
