#pragma once
// Persistence: JSONL datasets, JSON checkpoints and reports, and the flat
// key/value config format. Every artifact starts with a self-describing
// header (format, version, producing subcommand, config hash); nothing
// time-dependent is ever written, so identical runs produce identical bytes.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "gforge/core.hpp"
#include "gforge/interaction.hpp"
#include "gforge/metrics.hpp"
#include "gforge/policy.hpp"

namespace gforge {

inline constexpr int kFormatVersion = 1;

using PolicyVariant = std::variant<PolicyTable, TokenPolicy>;

// ----------------------------- json codecs -----------------------------

nlohmann::json task_to_json(const Task& task);
Task task_from_json(const nlohmann::json& j);

nlohmann::json guidance_to_json(const Guidance& g);
Guidance guidance_from_json(const nlohmann::json& j);

nlohmann::json observation_to_json(const Observation& o);
Observation observation_from_json(const nlohmann::json& j);

nlohmann::json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

nlohmann::json pair_to_json(const PreferencePair& p);
PreferencePair pair_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const MetricReport& r);

// ----------------------------- artifact files -----------------------------

struct ArtifactInfo {
    std::string producer;
    std::string config_hash;
};

void save_tasks(const std::filesystem::path& path, const std::vector<Task>& tasks,
                const ArtifactInfo& info);
std::vector<Task> load_tasks(const std::filesystem::path& path);

void save_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajs,
                       const ArtifactInfo& info);
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path);

void save_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs,
                const ArtifactInfo& info);
std::vector<PreferencePair> load_pairs(const std::filesystem::path& path);

void save_dataset(const std::filesystem::path& path, const GuidanceDataset& dataset,
                  const ArtifactInfo& info);
GuidanceDataset load_dataset(const std::filesystem::path& path);

// Checkpoints carry the policy kind, its vocabulary, flat parameter arrays,
// and the producing round; loading verifies format and version.
void save_checkpoint(const std::filesystem::path& path, const PolicyVariant& policy,
                     int iteration, const ArtifactInfo& info);
PolicyVariant load_checkpoint(const std::filesystem::path& path, int* iteration = nullptr);

void save_report(const std::filesystem::path& path, const nlohmann::json& payload,
                 const ArtifactInfo& info);
nlohmann::json load_report(const std::filesystem::path& path);

// ----------------------------- config -----------------------------

// Flat "section.key = value" text; '#' starts a comment. Environment
// variables GUIDANCE_FORGE_<SECTION>_<KEY> override file values.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> load_config_file(const std::filesystem::path& path,
                                                    bool apply_env_overrides = true);

// FNV-1a digest over the canonical "key = value" lines, as a hex string.
std::string config_hash(const std::map<std::string, std::string>& values);

}  // namespace gforge
