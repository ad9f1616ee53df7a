// vecsac: staged training, evaluation and self-checks.
//
//   vecsac pretrain --config desk.cfg --out_dir runs/a
//   vecsac distill  --config desk.cfg --out_dir runs/a
//   vecsac finetune --config desk.cfg --out_dir runs/a
//   vecsac eval     --checkpoint runs/a/finetuned --eval_difficulty 2
//   vecsac check
//
// Exit codes: 0 success, 1 configuration error, 2 numeric fault, 3 check failure.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include "checks/checks.hpp"
#include "vecsac/errors.hpp"
#include "vecsac/pipeline/trainer.hpp"
#include "vecsac/runtime.hpp"

using namespace vecsac;

namespace {

struct Overrides {
  std::string config_file;
  bool single_thread = false;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_config_options(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_file, "key = value configuration file");
  app->add_flag("--single-thread", o.single_thread, "deterministic interleaved sampler/learner");
  for (const auto& key : config_keys())
    o.options[key.name] = app->add_option("--" + key.name, o.values[key.name], key.help);
}

TrainConfig resolve(const Overrides& o) {
  KeyValueFile kv;
  if (!o.config_file.empty()) kv = KeyValueFile::read(o.config_file);
  for (const auto& [name, opt] : o.options)
    if (opt->count() > 0) kv.set(name, o.values.at(name));
  if (o.single_thread) kv.set("single_thread", "true");
  TrainConfig cfg = parse_config(kv);
  validate(cfg);
  return cfg;
}

void print_eval(const EvalReport& r) {
  std::cout << "episodes = " << r.episodes << '\n'
            << "env_reward_mean = " << format_double(r.env_reward_mean) << '\n'
            << "env_reward_std = " << format_double(r.env_reward_std) << '\n';
  for (int i = 0; i < kNumRewardTerms; ++i)
    std::cout << "sum_" << kRewardTermNames[i] << " = " << format_double(r.term_sums[i]) << '\n';
  std::cout << "sink_reach_fraction = " << format_double(r.sink_reach_fraction) << '\n'
            << "mean_speed = " << format_double(r.mean_speed) << '\n'
            << "direction_deg = " << format_double(r.direction * 180.0 / std::numbers::pi) << '\n';
}

void progress(const MetricsRow& r) {
  std::ostringstream os;
  os.precision(4);
  os << "[" << r.wall_time << " s] env_steps " << r.env_steps << " learner_steps " << r.learner_steps
     << " eval_reward " << r.eval_env_reward_mean << " speed " << r.eval_mean_speed << " sink_reach "
     << r.eval_sink_reach << " alpha " << r.alpha << " entropy " << r.entropy << '\n';
  std::cerr << os.str();
}

void print_stage(const StageOutput& s) {
  std::cout << "checkpoint: " << s.checkpoint.string() << '\n';
  if (!s.replay.empty()) std::cout << "replay snapshot: " << s.replay.string() << '\n';
  std::cout << "metrics: " << s.metrics.string() << '\n'
            << "env_steps = " << s.env_steps << '\n'
            << "learner_steps = " << s.learner_steps << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"vector-reward SAC with prioritized segment replay"};
  app.require_subcommand(1);

  Overrides pre, dis, fin, ev;
  auto* pretrain = app.add_subcommand("pretrain", "train the field-blind teacher");
  auto* distill = app.add_subcommand("distill", "distill the teacher into a field-aware student");
  auto* finetune = app.add_subcommand("finetune", "train the student on the target-following reward");
  auto* eval = app.add_subcommand("eval", "deterministic evaluation of a checkpoint");
  auto* check = app.add_subcommand("check", "run the oracle and invariant suites");
  add_config_options(pretrain, pre);
  add_config_options(distill, dis);
  add_config_options(finetune, fin);
  add_config_options(eval, ev);
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "checkpoint stem (default <out_dir>/finetuned)");
  std::string check_dir = "check_work";
  bool quick = false;
  check->add_option("--work_dir", check_dir, "scratch directory");
  check->add_flag("--quick", quick, "fewer random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*pretrain) {
      print_stage(run_pretrain(resolve(pre), progress));
    } else if (*distill) {
      TrainConfig cfg = resolve(dis);
      const StageOutput s = run_distill(cfg);
      print_stage(s);
      std::cout << "holdout_mean_kl = " << format_double(s.distill.mean_kl) << '\n'
                << "holdout_max_action_deviation = " << format_double(s.distill.max_action_deviation) << '\n'
                << "distill_passed = " << (s.distill.passed ? "true" : "false") << '\n';
    } else if (*finetune) {
      print_stage(run_finetune(resolve(fin), progress));
    } else if (*eval) {
      const TrainConfig cfg = resolve(ev);
      const auto stem = checkpoint.empty() ? std::filesystem::path(cfg.out_dir) / "finetuned"
                                           : std::filesystem::path(checkpoint);
      const SacAgent agent = load_checkpoint(stem);
      TrainConfig run_cfg = cfg;
      if (agent.actor.input_dim() == kStudentObsDim) {
        run_cfg.stage = Stage::finetune;
        apply_stage(run_cfg);
      }
      const int diff = cfg.eval_difficulty < 0 ? cfg.difficulty : cfg.eval_difficulty;
      print_eval(evaluate_policy(agent.actor, env_config(run_cfg), diff, cfg.eval_episodes, cfg.eval_seed));
    } else if (*check) {
      checks::CheckOptions opt;
      opt.quick = quick;
      opt.work_dir = check_dir;
      bool ok = true;
      for (const auto& r : checks::run_all(opt)) {
        checks::print(std::cout, r);
        ok = ok && r.passed;
      }
      return ok ? 0 : 3;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const NumericFault& e) {
    std::cerr << "numeric fault: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
