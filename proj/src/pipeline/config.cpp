#include "vecsac/pipeline/config.hpp"

#include <charconv>
#include <functional>
#include <map>

namespace vecsac {

std::string to_string(Stage s) { return s == Stage::pretrain ? "pretrain" : "finetune"; }

namespace {

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("key '" + key + "': not a number: '" + v + "'");
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

struct Field {
  ConfigKey key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field field(std::string name, std::string help, T TrainConfig::*m) {
  Field f;
  f.key = {name, std::move(help)};
  f.set = [m, name](TrainConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, bool>) {
      c.*m = parse_bool(name, v);
    } else if constexpr (std::is_same_v<T, double>) {
      c.*m = parse_real(name, v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      c.*m = v;
    } else {
      c.*m = parse_int<T>(name, v);
    }
  };
  f.get = [m](const TrainConfig& c) {
    if constexpr (std::is_same_v<T, bool>) {
      return std::string(c.*m ? "true" : "false");
    } else if constexpr (std::is_same_v<T, double>) {
      return format_double(c.*m);
    } else if constexpr (std::is_same_v<T, std::string>) {
      return c.*m;
    } else {
      return std::to_string(c.*m);
    }
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    Field stage;
    stage.key = {"stage", "pretrain | finetune"};
    stage.set = [](TrainConfig& c, const std::string& v) {
      if (v == "pretrain") c.stage = Stage::pretrain;
      else if (v == "finetune") c.stage = Stage::finetune;
      else throw ConfigError("key 'stage': expected pretrain or finetune, got '" + v + "'");
    };
    stage.get = [](const TrainConfig& c) { return to_string(c.stage); };
    t.push_back(stage);
    t.push_back(field("seed", "master seed", &TrainConfig::seed));
    t.push_back(field("difficulty", "training difficulty 0..3", &TrainConfig::difficulty));
    t.push_back(field("eval_difficulty", "evaluation difficulty, -1 = training difficulty", &TrainConfig::eval_difficulty));
    t.push_back(field("horizon", "episode step limit", &TrainConfig::horizon));
    t.push_back(field("arena_radius", "episode ends beyond this distance (m)", &TrainConfig::arena_radius));
    t.push_back(field("directional_pvb", "speed bonus along the target velocity (forced by stage)", &TrainConfig::directional_pvb));
    t.push_back(field("r_alive", "per-step alive reward", &TrainConfig::r_alive));
    t.push_back(field("w_step", "window duration weight", &TrainConfig::w_step));
    t.push_back(field("w_vel", "velocity cost weight (0 in pretrain)", &TrainConfig::w_vel));
    t.push_back(field("w_eff", "effort cost weight", &TrainConfig::w_eff));
    Field weights;
    weights.key = {"weights", "comma-separated reward weights (forced by stage)"};
    weights.set = [](TrainConfig& c, const std::string& v) {
      const auto parts = split(v, ',');
      if (static_cast<Index>(parts.size()) != kNumRewardTerms)
        throw ConfigError("key 'weights': expected " + std::to_string(kNumRewardTerms) + " values");
      for (int i = 0; i < kNumRewardTerms; ++i) c.weights[i] = parse_real("weights", trim(parts[i]));
    };
    weights.get = [](const TrainConfig& c) {
      std::string s;
      for (int i = 0; i < kNumRewardTerms; ++i) s += (i ? "," : "") + format_double(c.weights[i]);
      return s;
    };
    t.push_back(weights);
    t.push_back(field("num_samplers", "parallel environment workers", &TrainConfig::num_samplers));
    t.push_back(field("batch", "segments per learner step", &TrainConfig::batch));
    t.push_back(field("replay_ratio", "learner steps per segment per sampler", &TrainConfig::replay_ratio));
    t.push_back(field("publish_every", "learner steps between policy publications", &TrainConfig::publish_every));
    t.push_back(field("warmup_segments", "segments stored before learning starts", &TrainConfig::warmup_segments));
    t.push_back(field("total_env_steps", "environment steps across all samplers", &TrainConfig::total_env_steps));
    t.push_back(field("epoch_env_steps", "environment steps between evaluations", &TrainConfig::epoch_env_steps));
    t.push_back(field("eval_episodes", "deterministic episodes per evaluation", &TrainConfig::eval_episodes));
    t.push_back(field("eval_seed", "seed of evaluation episodes", &TrainConfig::eval_seed));
    t.push_back(field("single_thread", "deterministic interleaved sampler/learner", &TrainConfig::single_thread));
    t.push_back(field("hidden", "hidden width of actor and critics", &TrainConfig::hidden));
    t.push_back(field("gamma", "discount", &TrainConfig::gamma));
    t.push_back(field("n_step", "n-step return length", &TrainConfig::n_step));
    t.push_back(field("segment_length", "transitions per segment", &TrainConfig::segment_length));
    t.push_back(field("rescale_eps", "value rescaling epsilon", &TrainConfig::rescale_eps));
    t.push_back(field("identity_rescale", "disable value rescaling", &TrainConfig::identity_rescale));
    t.push_back(field("tau", "target soft update rate", &TrainConfig::tau));
    t.push_back(field("init_alpha", "initial temperature", &TrainConfig::init_alpha));
    t.push_back(field("actor_lr", "actor Adam learning rate", &TrainConfig::actor_lr));
    t.push_back(field("critic_lr", "critic Adam learning rate", &TrainConfig::critic_lr));
    t.push_back(field("alpha_lr", "temperature Adam learning rate", &TrainConfig::alpha_lr));
    t.push_back(field("capacity", "replay capacity in segments", &TrainConfig::capacity));
    t.push_back(field("eta", "max/mean priority mix", &TrainConfig::eta));
    t.push_back(field("priority_exp_start", "initial priority and importance exponents", &TrainConfig::priority_exp_start));
    t.push_back(field("priority_exp_end", "final priority and importance exponents", &TrainConfig::priority_exp_end));
    t.push_back(field("anneal_steps", "learner steps of the exponent anneal", &TrainConfig::anneal_steps));
    t.push_back(field("distill_noise_std", "std of the stand-in field input", &TrainConfig::distill_noise_std));
    t.push_back(field("distill_batch", "states per distillation step", &TrainConfig::distill_batch));
    t.push_back(field("distill_lr", "student Adam learning rate", &TrainConfig::distill_lr));
    t.push_back(field("distill_lr_final", "final learning rate of a geometric decay (0: constant)",
                      &TrainConfig::distill_lr_final));
    t.push_back(field("student_hidden", "student hidden width", &TrainConfig::student_hidden));
    t.push_back(field("distill_max_steps", "distillation step limit", &TrainConfig::distill_max_steps));
    t.push_back(field("distill_kl_stop", "stop when the running KL drops below this", &TrainConfig::distill_kl_stop));
    t.push_back(field("distill_holdout", "fraction of episodes held out", &TrainConfig::distill_holdout));
    t.push_back(field("distill_per_coordinate", "match every critic head", &TrainConfig::distill_per_coordinate));
    t.push_back(field("distill_warm_start", "start the student from the teacher weights",
                      &TrainConfig::distill_warm_start));
    t.push_back(field("distill_field_scale", "warm start: range of the initial field weights",
                      &TrainConfig::distill_field_scale));
    t.push_back(field("out_dir", "output directory", &TrainConfig::out_dir));
    t.push_back(field("init_checkpoint", "checkpoint stem to start finetuning from", &TrainConfig::init_checkpoint));
    t.push_back(field("teacher", "teacher checkpoint stem", &TrainConfig::teacher));
    t.push_back(field("replay", "replay snapshot stem", &TrainConfig::replay));
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

TrainConfig parse_config(const KeyValueFile& kv) {
  std::map<std::string, const Field*> by_name;
  for (const auto& f : fields()) by_name[f.key.name] = &f;
  TrainConfig cfg;
  for (const auto& [k, v] : kv.entries()) {
    auto it = by_name.find(k);
    if (it == by_name.end()) throw ConfigError("unknown config key '" + k + "'");
    it->second->set(cfg, v);
  }
  return cfg;
}

KeyValueFile to_key_values(const TrainConfig& cfg) {
  KeyValueFile kv;
  for (const auto& f : fields()) kv.set(f.key.name, f.get(cfg));
  return kv;
}

void apply_stage(TrainConfig& cfg) {
  if (cfg.stage == Stage::pretrain) {
    cfg.weights = pretrain_weights();
    cfg.w_vel = 0;
    cfg.directional_pvb = false;
  } else {
    cfg.weights = finetune_weights();
    cfg.directional_pvb = true;
  }
}

void validate(const TrainConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(c.difficulty >= 0 && c.difficulty <= 3, "difficulty must be 0..3");
  need(c.eval_difficulty >= -1 && c.eval_difficulty <= 3, "eval_difficulty must be -1..3");
  need(c.num_samplers >= 1, "num_samplers must be >= 1");
  need(c.batch >= 1, "batch must be >= 1");
  need(c.replay_ratio > 0, "replay_ratio must be positive");
  need(c.publish_every >= 1, "publish_every must be >= 1");
  need(c.gamma > 0 && c.gamma < 1, "gamma must lie in (0, 1)");
  need(c.n_step >= 1, "n_step must be >= 1");
  need(c.segment_length >= 2, "segment_length must be >= 2");
  need(c.rescale_eps > 0, "rescale_eps must be positive");
  need(c.tau >= 0 && c.tau <= 1, "tau must lie in [0, 1]");
  need(c.init_alpha > 0, "init_alpha must be positive");
  need(c.capacity >= static_cast<std::size_t>(c.batch), "capacity must hold at least one batch");
  need(c.eta >= 0 && c.eta <= 1, "eta must lie in [0, 1]");
  need(c.hidden >= 1 && c.student_hidden >= 1, "hidden widths must be positive");
  need(c.epoch_env_steps >= 1 && c.total_env_steps >= 0, "step budgets must be non-negative");
  need(c.distill_noise_std >= 0, "distill_noise_std must be non-negative");
  need(c.distill_kl_stop > 0, "distill_kl_stop must be positive");
  need(c.distill_lr_final >= 0, "distill_lr_final must be non-negative");
  need(c.distill_field_scale >= 0, "distill_field_scale must be non-negative");
  need(!c.distill_warm_start || c.student_hidden == c.hidden, "distill_warm_start needs student_hidden == hidden");
  need(c.eval_episodes >= 0, "eval_episodes must be non-negative");
}

SacHyper sac_hyper(const TrainConfig& c) {
  SacHyper h;
  h.gamma = c.gamma;
  h.n_step = c.n_step;
  h.rescale = {c.rescale_eps, c.identity_rescale};
  h.target_entropy = -static_cast<double>(kActionDim);
  h.weights = c.weights;
  h.tau = c.tau;
  h.eta = c.eta;
  h.actor_opt.lr = c.actor_lr;
  h.critic_opt.lr = c.critic_lr;
  h.alpha_opt.lr = c.alpha_lr;
  return h;
}

StoreConfig store_config(const TrainConfig& c) {
  StoreConfig s;
  s.capacity = c.capacity;
  s.layout = {c.segment_length, c.n_step};
  s.eta = c.eta;
  return s;
}

EnvConfig env_config(const TrainConfig& c) {
  EnvConfig e;
  e.horizon = c.horizon;
  e.arena_radius = c.arena_radius;
  e.directional_pvb = c.directional_pvb;
  e.reward.r_alive = c.r_alive;
  e.reward.w_step = c.w_step;
  e.reward.w_vel = c.w_vel;
  e.reward.w_eff = c.w_eff;
  return e;
}

DistillConfig distill_config(const TrainConfig& c) {
  DistillConfig d;
  d.noise_std = c.distill_noise_std;
  d.batch = c.distill_batch;
  d.lr = c.distill_lr;
  d.lr_final = c.distill_lr_final;
  d.student_hidden = c.student_hidden;
  d.max_steps = c.distill_max_steps;
  d.kl_stop = c.distill_kl_stop;
  d.holdout_fraction = c.distill_holdout;
  d.per_coordinate_q = c.distill_per_coordinate;
  return d;
}

AnnealSchedule priority_anneal(const TrainConfig& c) {
  return {c.priority_exp_start, c.priority_exp_end, c.anneal_steps};
}

}  // namespace vecsac
