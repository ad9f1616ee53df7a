#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vecsac/distill/distill.hpp"
#include "vecsac/env/velocity_env.hpp"
#include "vecsac/key_value.hpp"
#include "vecsac/replay/prioritized_store.hpp"
#include "vecsac/sac/sac.hpp"

namespace vecsac {

enum class Stage { pretrain, finetune };

/// Everything one curriculum stage needs. Desk-scale defaults; see
/// configs/full_scale.cfg for the large setting.
struct TrainConfig {
  Stage stage = Stage::pretrain;
  std::uint64_t seed = 1;
  int difficulty = 0;
  int eval_difficulty = -1;  // -1: same as difficulty

  // environment and reward
  int horizon = 1000;
  double arena_radius = 20.0;
  bool directional_pvb = false;
  double r_alive = 0.1, w_step = 1.0, w_vel = 1.0, w_eff = 1.0;
  RewardWeights weights = pretrain_weights();

  // pipeline
  Index num_samplers = 4;
  Index batch = 32;  // segments per learner step
  double replay_ratio = 4.0;
  Index publish_every = 100;
  Index warmup_segments = 64;
  std::int64_t total_env_steps = 300000;
  std::int64_t epoch_env_steps = 10000;
  Index eval_episodes = 5;
  std::uint64_t eval_seed = 1000;
  bool single_thread = false;

  // learner
  Index hidden = 64;
  double gamma = 0.99;
  Index n_step = 5;
  Index segment_length = 10;
  double rescale_eps = 1e-3;
  bool identity_rescale = false;
  double tau = 0.005;
  double init_alpha = 0.1;
  double actor_lr = 3e-4, critic_lr = 3e-4, alpha_lr = 3e-4;

  // replay
  std::size_t capacity = 16384;
  double eta = 0.9;
  double priority_exp_start = 0.1, priority_exp_end = 0.9;
  std::int64_t anneal_steps = 3000;

  // distillation
  double distill_noise_std = 0.1;
  Index distill_batch = 128;
  double distill_lr = 1e-4;
  double distill_lr_final = 0;
  Index student_hidden = 64;
  Index distill_max_steps = 20000;
  double distill_kl_stop = 1e-3;
  double distill_holdout = 0.1;
  bool distill_per_coordinate = false;
  bool distill_warm_start = false;  // student starts as the teacher
  double distill_field_scale = 0.01;  // warm start: field weights ~ U(-scale, scale)

  // files
  std::string out_dir = "run";
  std::string init_checkpoint;  // finetune: student stem
  std::string teacher;          // distill: teacher stem
  std::string replay;           // distill: replay snapshot stem
};

std::string to_string(Stage s);

struct ConfigKey {
  std::string name;
  std::string help;
};

/// Every accepted key, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Unknown keys and unparsable values raise ConfigError naming the key.
TrainConfig parse_config(const KeyValueFile& kv);
KeyValueFile to_key_values(const TrainConfig& cfg);

/// Stage rules: pretrain uses pretrain_weights(), w_vel = 0 and the plain
/// speed bonus; finetune uses finetune_weights() and the directional bonus.
void apply_stage(TrainConfig& cfg);

/// Range and consistency checks (ConfigError).
void validate(const TrainConfig& cfg);

SacHyper sac_hyper(const TrainConfig& cfg);
StoreConfig store_config(const TrainConfig& cfg);
EnvConfig env_config(const TrainConfig& cfg);
DistillConfig distill_config(const TrainConfig& cfg);
AnnealSchedule priority_anneal(const TrainConfig& cfg);

}  // namespace vecsac
