#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "vecsac/pipeline/config.hpp"
#include "vecsac/pipeline/evaluate.hpp"
#include "vecsac/pipeline/metrics.hpp"
#include "vecsac/pipeline/sampler.hpp"

namespace vecsac {

/// Counters checked by the throttle audit.
struct ThrottleAudit {
  std::int64_t learner_steps = 0;
  std::uint64_t segments_appended = 0;
  double max_excess = 0;  // max over steps of learner_steps - ratio * appended / samplers
  std::uint64_t sequence_duplicates = 0;
};

struct TrainResult {
  SacAgent agent;
  std::unique_ptr<PrioritizedStore> store;
  std::vector<MetricsRow> metrics;
  EvalReport final_eval;
  std::int64_t env_steps = 0;
  std::int64_t learner_steps = 0;
  std::uint64_t policy_version = 0;
  ThrottleAudit audit;
};

/// Samplers feeding a prioritized store and one learner training on it.
///
/// The learner may take step k only while k <= replay_ratio * appended /
/// num_samplers and at least max(batch, warmup_segments) segments are
/// stored. Samplers pause once they are num_samplers segments past what the
/// learner can consume, so the ratio holds throughout the run.
class Trainer {
 public:
  Trainer(TrainConfig cfg, SacAgent agent);

  /// Called after each learner step with the step count (tests, logging).
  void on_learner_step(std::function<void(std::int64_t)> f) { step_hook_ = std::move(f); }
  /// Called after every metrics row.
  void on_epoch(std::function<void(const MetricsRow&)> f) { epoch_hook_ = std::move(f); }

  TrainResult run();

 private:
  bool learner_may_step() const;
  bool samplers_may_append() const;
  void learner_step();
  void append(std::vector<Segment> segs);
  void maybe_epoch(bool force);
  void run_single_thread();
  void run_threaded();

  TrainConfig cfg_;
  SacAgent agent_;
  SacHyper hyper_;
  AnnealSchedule anneal_;
  std::unique_ptr<PrioritizedStore> store_;
  SnapshotHandle snapshot_;
  std::vector<Sampler> samplers_;
  Rng learner_rng_;

  std::atomic<std::int64_t> env_steps_{0};
  std::atomic<std::uint64_t> appended_{0};
  std::atomic<std::int64_t> learner_steps_{0};
  std::int64_t next_epoch_ = 0;
  ThrottleAudit audit_;
  std::vector<std::uint64_t> seen_sequences_;

  // running means over the current epoch
  double sum_critic_ = 0, sum_actor_ = 0, sum_temp_ = 0, sum_entropy_ = 0;
  std::int64_t epoch_learner_steps_ = 0;
  std::vector<MetricsRow> metrics_;
  std::chrono::steady_clock::time_point start_;

  std::mutex mu_;
  std::condition_variable cv_;
  bool stop_ = false;

  std::function<void(std::int64_t)> step_hook_;
  std::function<void(const MetricsRow&)> epoch_hook_;
};

/// Checkpoint = SacAgent archive plus the producing config and counters as metadata.
void save_checkpoint(const std::filesystem::path& stem, const SacAgent& agent, const TrainConfig& cfg,
                     std::int64_t env_steps, std::int64_t learner_steps);
SacAgent load_checkpoint(const std::filesystem::path& stem);

struct StageOutput {
  std::filesystem::path checkpoint;
  std::filesystem::path replay;
  std::filesystem::path metrics;
  EvalReport eval;
  DistillReport distill;
  std::int64_t env_steps = 0;
  std::int64_t learner_steps = 0;
};

using EpochHook = std::function<void(const MetricsRow&)>;

/// Field-blind teacher from scratch; writes <out>/teacher, <out>/replay and <out>/pretrain_metrics.csv.
StageOutput run_pretrain(TrainConfig cfg, const EpochHook& on_epoch = {});
/// Student from <teacher> and <replay>; writes <out>/student and <out>/distill_metrics.csv.
StageOutput run_distill(const TrainConfig& cfg);
/// Resumes the student with an empty replay; writes <out>/finetuned and <out>/finetune_metrics.csv.
StageOutput run_finetune(TrainConfig cfg, const EpochHook& on_epoch = {});

}  // namespace vecsac
