#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vecsac/reward/reward_terms.hpp"

namespace vecsac {

/// One row per epoch. Losses are means over the epoch's learner steps.
struct MetricsRow {
  double wall_time = 0;
  std::int64_t env_steps = 0;
  std::int64_t learner_steps = 0;
  double eval_env_reward_mean = 0;
  double eval_env_reward_std = 0;
  RewardVector eval_term_sums = RewardVector::Zero();
  double eval_sink_reach = 0;
  double eval_mean_speed = 0;
  double critic_loss = 0;
  double actor_loss = 0;
  double temperature_loss = 0;
  double alpha = 0;
  double entropy = 0;
  double priority_mean = 0;
  double priority_max = 0;
  std::int64_t store_size = 0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

std::string metrics_header();
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

}  // namespace vecsac
