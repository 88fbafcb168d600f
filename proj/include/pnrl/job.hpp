#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnrl/config.hpp"
#include "pnrl/learners.hpp"

namespace pnrl {

// One metric row per completed episode. Rows are deterministic functions of
// the config; wall-clock time is attached by the service, not here.
struct MetricRow {
  std::size_t seq = 0;  // 1-based, strictly increasing
  std::size_t env_step = 0;
  std::size_t episode = 0;
  std::vector<double> mean_return;                 // per seat, last <= 20 episodes
  std::vector<std::optional<UpdateReport>> losses;  // per seat, latest update of the active agent

  nlohmann::json to_json() const;
  static MetricRow from_json(const nlohmann::json& j);
};

inline constexpr std::size_t kReturnWindow = 20;

struct JobHooks {
  std::function<void(const MetricRow&)> on_metric;
  std::function<bool()> should_stop;
};

enum class JobOutcome { Succeeded, Cancelled };

struct JobResult {
  JobOutcome outcome = JobOutcome::Succeeded;
  nlohmann::json summary;
  std::vector<std::filesystem::path> artifacts;
};

// Runs a validated config to completion and writes its artifacts into
// `out_dir`. Used by both the CLI and the service so that identical configs
// produce identical files. Throws ConfigError for bad configs and any other
// Error for runtime failures.
//
// Artifacts: train/adapt write ego.pnrlpol, seat<S>_partner<K>.pnrlpol,
// trajectory.pnrltrj (final episode), metrics.jsonl, summary.json;
// adhoc_eval writes eval.json, metrics.jsonl, trajectory.pnrltrj;
// cross_play writes crossplay.json.
JobResult run_job(const InteractionConfig& config, const std::filesystem::path& out_dir, const JobHooks& hooks = {});

}  // namespace pnrl
