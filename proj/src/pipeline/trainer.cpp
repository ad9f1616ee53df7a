#include "vecsac/pipeline/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <thread>

#include "vecsac/grad/serialize.hpp"

namespace vecsac {

namespace {

bool uses_student_obs(const SacAgent& agent) { return agent.actor.input_dim() == kStudentObsDim; }

std::int64_t ready_threshold(const TrainConfig& c) { return std::max<std::int64_t>(c.batch, c.warmup_segments); }

}  // namespace

Trainer::Trainer(TrainConfig cfg, SacAgent agent)
    : cfg_(std::move(cfg)),
      agent_(std::move(agent)),
      hyper_(sac_hyper(cfg_)),
      anneal_(priority_anneal(cfg_)),
      store_(std::make_unique<PrioritizedStore>(store_config(cfg_))),
      learner_rng_(cfg_.seed * 2654435761ULL + 17) {
  validate(cfg_);
  const Index obs_dim = agent_.actor.input_dim();
  if (obs_dim != kTeacherObsDim && obs_dim != kStudentObsDim)
    throw ConfigError("actor input width " + std::to_string(obs_dim) + " matches neither observation kind");
  if (agent_.critics.n_terms() != kNumRewardTerms)
    throw ConfigError("critics have " + std::to_string(agent_.critics.n_terms()) + " heads, expected " +
                      std::to_string(kNumRewardTerms));
  const EnvConfig env = env_config(cfg_);
  const SegmentLayout layout{cfg_.segment_length, cfg_.n_step};
  for (Index i = 0; i < cfg_.num_samplers; ++i)
    samplers_.emplace_back(i, cfg_.seed, env, cfg_.difficulty, layout, uses_student_obs(agent_));
  store_->set_exponents(anneal_.value(0), anneal_.value(0));
  snapshot_.publish(agent_.actor, agent_.alpha());
}

bool Trainer::learner_may_step() const {
  const double allowed = cfg_.replay_ratio * static_cast<double>(appended_.load()) / double(cfg_.num_samplers);
  return static_cast<std::int64_t>(store_->size()) >= ready_threshold(cfg_) &&
         static_cast<double>(learner_steps_.load() + 1) <= allowed;
}

bool Trainer::samplers_may_append() const {
  const double consumable =
      std::ceil(static_cast<double>(learner_steps_.load() + 1) * double(cfg_.num_samplers) / cfg_.replay_ratio);
  const double limit = std::max<double>(consumable, double(ready_threshold(cfg_))) + double(cfg_.num_samplers);
  return static_cast<double>(appended_.load()) < limit;
}

void Trainer::append(std::vector<Segment> segs) {
  for (auto& s : segs) {
    seen_sequences_.push_back(s.sequence);
    store_->append(std::move(s));
    ++appended_;
  }
}

void Trainer::learner_step() {
  const std::int64_t k = learner_steps_.load();
  const double e = anneal_.value(k);
  if (e != store_->alpha() || e != store_->beta()) store_->set_exponents(e, e);
  auto batch = store_->sample(static_cast<std::size_t>(cfg_.batch), learner_rng_);
  if (!batch) throw ContractViolation("learner stepped before the store was ready");
  TrainStepStats stats;
  try {
    stats = train_step(agent_, *batch, hyper_, learner_rng_);
  } catch (const NumericFault& f) {
    const auto stem = std::filesystem::path(cfg_.out_dir) / "fault_checkpoint";
    std::filesystem::create_directories(cfg_.out_dir);
    save_checkpoint(stem, agent_, cfg_, env_steps_.load(), k);
    throw NumericFault(std::string(f.what()) + "; checkpoint saved to " + stem.string());
  }
  store_->update_priorities(batch->slots, stats.segment_priorities);
  learner_steps_.store(k + 1);
  const double excess =
      double(k + 1) - cfg_.replay_ratio * static_cast<double>(appended_.load()) / double(cfg_.num_samplers);
  audit_.max_excess = std::max(audit_.max_excess, excess);
  sum_critic_ += stats.critic_loss;
  sum_actor_ += stats.actor_loss;
  sum_temp_ += stats.temperature_loss;
  sum_entropy_ += stats.entropy;
  ++epoch_learner_steps_;
  if ((k + 1) % cfg_.publish_every == 0) snapshot_.publish(agent_.actor, agent_.alpha());
  if (step_hook_) step_hook_(k + 1);
}

void Trainer::maybe_epoch(bool force) {
  const std::int64_t env = env_steps_.load();
  if (!force && env < next_epoch_) return;
  while (next_epoch_ <= env) next_epoch_ += cfg_.epoch_env_steps;
  MetricsRow row;
  row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  row.env_steps = env;
  row.learner_steps = learner_steps_.load();
  const int eval_diff = cfg_.eval_difficulty < 0 ? cfg_.difficulty : cfg_.eval_difficulty;
  const EvalReport ev = evaluate_policy(agent_.actor, env_config(cfg_), eval_diff, cfg_.eval_episodes, cfg_.eval_seed);
  row.eval_env_reward_mean = ev.env_reward_mean;
  row.eval_env_reward_std = ev.env_reward_std;
  row.eval_term_sums = ev.term_sums;
  row.eval_sink_reach = ev.sink_reach_fraction;
  row.eval_mean_speed = ev.mean_speed;
  if (epoch_learner_steps_ > 0) {
    const double n = double(epoch_learner_steps_);
    row.critic_loss = sum_critic_ / n;
    row.actor_loss = sum_actor_ / n;
    row.temperature_loss = sum_temp_ / n;
    row.entropy = sum_entropy_ / n;
  }
  row.alpha = agent_.alpha();
  const StoreStats st = store_->stats();
  row.priority_mean = st.mean_priority;
  row.priority_max = st.max_priority;
  row.store_size = static_cast<std::int64_t>(st.size);
  sum_critic_ = sum_actor_ = sum_temp_ = sum_entropy_ = 0;
  epoch_learner_steps_ = 0;
  metrics_.push_back(row);
  if (epoch_hook_) epoch_hook_(row);
}

void Trainer::run_single_thread() {
  std::shared_ptr<const PolicySnapshot> snap = snapshot_.get();
  while (env_steps_.load() < cfg_.total_env_steps) {
    for (auto& s : samplers_) {
      if (env_steps_.load() >= cfg_.total_env_steps) break;
      if (snapshot_.version() != snap->version) snap = snapshot_.get();
      std::vector<Segment> segs;
      while (segs.empty() && env_steps_.load() < cfg_.total_env_steps) {
        segs = s.step(*snap);
        ++env_steps_;
      }
      append(std::move(segs));
      while (learner_may_step()) learner_step();
      maybe_epoch(false);
    }
  }
}

void Trainer::run_threaded() {
  std::exception_ptr error;
  std::atomic<Index> running{static_cast<Index>(samplers_.size())};
  std::vector<std::thread> threads;
  for (auto& sampler : samplers_) {
    threads.emplace_back([&, s = &sampler] {
      try {
        std::shared_ptr<const PolicySnapshot> snap = snapshot_.get();
        for (;;) {
          {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return stop_ || samplers_may_append(); });
            if (stop_) break;
          }
          if (env_steps_.fetch_add(1) >= cfg_.total_env_steps) {
            --env_steps_;
            break;
          }
          if (snapshot_.version() != snap->version) snap = snapshot_.get();
          std::vector<Segment> segs = s->step(*snap);
          if (!segs.empty()) {
            {
              std::lock_guard lock(mu_);
              append(std::move(segs));
            }
            cv_.notify_all();
          }
        }
      } catch (...) {
        std::lock_guard lock(mu_);
        if (!error) error = std::current_exception();
        stop_ = true;
      }
      {
        std::lock_guard lock(mu_);
        --running;
      }
      cv_.notify_all();
    });
  }

  try {
    for (;;) {
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stop_ || learner_may_step() || running.load() == 0; });
        if (stop_) break;
        if (!learner_may_step()) {
          if (running.load() == 0) break;
          continue;
        }
      }
      learner_step();
      { std::lock_guard lock(mu_); }  // order the counter update before waking samplers
      cv_.notify_all();
      maybe_epoch(false);
    }
  } catch (...) {
    std::lock_guard lock(mu_);
    if (!error) error = std::current_exception();
    stop_ = true;
  }
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

TrainResult Trainer::run() {
  start_ = std::chrono::steady_clock::now();
  next_epoch_ = cfg_.epoch_env_steps;
  if (cfg_.single_thread)
    run_single_thread();
  else
    run_threaded();
  if (metrics_.empty() || metrics_.back().env_steps != env_steps_.load()) maybe_epoch(true);

  TrainResult r;
  std::sort(seen_sequences_.begin(), seen_sequences_.end());
  audit_.sequence_duplicates = static_cast<std::uint64_t>(
      seen_sequences_.end() - std::unique(seen_sequences_.begin(), seen_sequences_.end()));
  audit_.learner_steps = learner_steps_.load();
  audit_.segments_appended = appended_.load();
  r.audit = audit_;
  r.env_steps = env_steps_.load();
  r.learner_steps = learner_steps_.load();
  r.policy_version = snapshot_.version();
  r.metrics = metrics_;
  const int eval_diff = cfg_.eval_difficulty < 0 ? cfg_.difficulty : cfg_.eval_difficulty;
  r.final_eval = evaluate_policy(agent_.actor, env_config(cfg_), eval_diff, cfg_.eval_episodes, cfg_.eval_seed);
  r.agent = std::move(agent_);
  r.store = std::move(store_);
  return r;
}

void save_checkpoint(const std::filesystem::path& stem, const SacAgent& agent, const TrainConfig& cfg,
                     std::int64_t env_steps, std::int64_t learner_steps) {
  ParamArchive a = agent.to_archive();
  a.meta.emplace_back("stage", to_string(cfg.stage));
  a.meta.emplace_back("env_steps", std::to_string(env_steps));
  a.meta.emplace_back("learner_steps", std::to_string(learner_steps));
  const KeyValueFile kv = to_key_values(cfg);
  for (const auto& [k, v] : kv.entries()) a.meta.emplace_back("config." + k, v);
  save_archive(stem, a);
}

SacAgent load_checkpoint(const std::filesystem::path& stem) {
  auto manifest = stem;
  manifest += ".manifest";
  if (!std::filesystem::exists(manifest))
    throw ConfigError("checkpoint not found: expected " + manifest.string());
  return SacAgent::from_archive(load_archive(stem));
}

namespace {

std::filesystem::path out_path(const TrainConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return std::filesystem::path(cfg.out_dir) / name;
}

StageOutput train_stage(const TrainConfig& cfg, SacAgent agent, const std::string& ckpt_name,
                        const std::string& metrics_name, bool save_replay, const EpochHook& on_epoch) {
  Trainer trainer(cfg, std::move(agent));
  if (on_epoch) trainer.on_epoch(on_epoch);
  TrainResult r = trainer.run();
  StageOutput out;
  out.checkpoint = out_path(cfg, ckpt_name);
  out.metrics = out_path(cfg, metrics_name);
  save_checkpoint(out.checkpoint, r.agent, cfg, r.env_steps, r.learner_steps);
  write_metrics_csv(out.metrics, r.metrics);
  if (save_replay) {
    out.replay = out_path(cfg, "replay");
    r.store->save(out.replay);
  }
  out.eval = r.final_eval;
  out.env_steps = r.env_steps;
  out.learner_steps = r.learner_steps;
  return out;
}

}  // namespace

StageOutput run_pretrain(TrainConfig cfg, const EpochHook& on_epoch) {
  cfg.stage = Stage::pretrain;
  apply_stage(cfg);
  validate(cfg);
  Rng rng(cfg.seed);
  SacAgent agent = SacAgent::create(kTeacherObsDim, kActionDim, cfg.hidden, kNumRewardTerms, cfg.init_alpha, rng);
  return train_stage(cfg, std::move(agent), "teacher", "pretrain_metrics.csv", true, on_epoch);
}

StageOutput run_distill(const TrainConfig& cfg) {
  validate(cfg);
  const auto teacher_stem = cfg.teacher.empty() ? std::filesystem::path(cfg.out_dir) / "teacher"
                                                : std::filesystem::path(cfg.teacher);
  const auto replay_stem = cfg.replay.empty() ? std::filesystem::path(cfg.out_dir) / "replay"
                                              : std::filesystem::path(cfg.replay);
  const SacAgent teacher = load_checkpoint(teacher_stem);
  auto replay_manifest = replay_stem;
  replay_manifest += ".manifest";
  if (!std::filesystem::exists(replay_manifest))
    throw ConfigError("replay snapshot not found: expected " + replay_manifest.string());
  const auto store = PrioritizedStore::load(replay_stem);
  if (teacher.actor.input_dim() != kTeacherObsDim)
    throw ConfigError("teacher actor must read the " + std::to_string(kTeacherObsDim) + "-wide observation");

  Rng rng(cfg.seed * 31 + 5);
  const DistillConfig dc = distill_config(cfg);
  const DistillStates states = collect_states(*store, dc.holdout_fraction, rng);
  SacAgent student = cfg.distill_warm_start ? clone_teacher_as_student(teacher, kFieldDim, cfg.distill_field_scale, rng)
                                            : build_student(teacher, kFieldDim, dc.student_hidden, rng);
  const DistillRun run = run_distillation(student, teacher, cfg.weights, states, rng, dc);

  StageOutput out;
  out.checkpoint = out_path(cfg, "student");
  out.metrics = out_path(cfg, "distill_metrics.csv");
  TrainConfig meta = cfg;
  save_checkpoint(out.checkpoint, student, meta, 0, static_cast<std::int64_t>(run.rows.size()));
  write_distill_csv(out.metrics, run);
  out.distill = run.report;
  out.learner_steps = static_cast<std::int64_t>(run.rows.size());
  return out;
}

StageOutput run_finetune(TrainConfig cfg, const EpochHook& on_epoch) {
  cfg.stage = Stage::finetune;
  apply_stage(cfg);
  validate(cfg);
  const auto init = cfg.init_checkpoint.empty() ? std::filesystem::path(cfg.out_dir) / "student"
                                                : std::filesystem::path(cfg.init_checkpoint);
  SacAgent agent = load_checkpoint(init);
  if (agent.actor.input_dim() != kStudentObsDim)
    throw ConfigError("finetuning needs a field-aware checkpoint (actor input " + std::to_string(kStudentObsDim) +
                      "), got input " + std::to_string(agent.actor.input_dim()));
  return train_stage(cfg, std::move(agent), "finetuned", "finetune_metrics.csv", false, on_epoch);
}

}  // namespace vecsac
