// Acceptance run: one PASS/FAIL line per criterion, sub-check details indented.
//
//   vecsac_acceptance                     all criteria
//   vecsac_acceptance --criteria 1,2,5    a subset
//   vecsac_acceptance --quick             fewer instances, shorter learning runs

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <sys/wait.h>

#include "checks/checks.hpp"
#include "checks/oracles.hpp"
#include "vecsac/pipeline/trainer.hpp"
#include "vecsac/runtime.hpp"

using namespace vecsac;
using checks::CheckResult;

namespace {

struct Options {
  std::filesystem::path work_dir = "acceptance_work";
  std::filesystem::path desk_config = VECSAC_SOURCE_DIR "/configs/desk.cfg";
  std::filesystem::path tiny_config = VECSAC_SOURCE_DIR "/configs/tiny_ci.cfg";
  std::filesystem::path cli = VECSAC_CLI_PATH;
  int seeds = 5;
  bool quick = false;
};

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string archive_bytes(const std::filesystem::path& stem) {
  auto m = stem, b = stem;
  m += ".manifest";
  b += ".bin";
  return read_bytes(m) + read_bytes(b);
}

TrainConfig desk_config(const Options& o) { return parse_config(KeyValueFile::read(o.desk_config)); }

double degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Length of the shortest arc holding every direction (degrees).
double circular_spread(std::vector<double> deg) {
  if (deg.size() < 2) return 0;
  for (auto& d : deg) d = std::fmod(std::fmod(d, 360.0) + 360.0, 360.0);
  std::sort(deg.begin(), deg.end());
  double gap = 360.0 - deg.back() + deg.front();
  for (std::size_t i = 1; i < deg.size(); ++i) gap = std::max(gap, deg[i] - deg[i - 1]);
  return 360.0 - gap;
}

VectorXd follow_field(const StepResult& s) {
  const Vec2 v = s.obs_teacher.segment(2, 2) / 0.25;
  const Vec2 a = 2.0 * (s.info.v_tgt - v) + 0.25 * v;
  return a.cwiseMax(-0.999).cwiseMin(0.999);
}

void log_epoch(const std::string& tag, const MetricsRow& r) {
  std::cerr << "    [" << tag << "] env " << r.env_steps << " learner " << r.learner_steps << " speed "
            << r.eval_mean_speed << " reach " << r.eval_sink_reach << " r_env " << r.eval_env_reward_mean
            << " alpha " << r.alpha << " (" << std::fixed << std::setprecision(0) << r.wall_time << " s)"
            << std::defaultfloat << std::setprecision(6) << '\n';
}

std::vector<CheckResult> learning_smoke(const Options& o) {
  std::vector<CheckResult> out;
  TrainConfig base = desk_config(o);
  if (o.quick) {
    base.total_env_steps = 20000;
    base.epoch_env_steps = 10000;
  }
  const auto root = o.work_dir / "learning";
  std::vector<StageOutput> teachers;

  out.push_back(checks::timed(6, "pretrain moves fast in seed-dependent directions", [&](std::ostringstream& d) {
    std::vector<double> dirs;
    bool fast = true;
    for (int s = 1; s <= o.seeds; ++s) {
      TrainConfig c = base;
      c.seed = static_cast<std::uint64_t>(s);
      c.out_dir = (root / ("seed" + std::to_string(s))).string();
      std::filesystem::remove_all(c.out_dir);
      const std::string tag = "pretrain seed " + std::to_string(s);
      teachers.push_back(run_pretrain(c, [&](const MetricsRow& r) { log_epoch(tag, r); }));
      const EvalReport& e = teachers.back().eval;
      dirs.push_back(degrees(e.direction));
      fast = fast && e.mean_speed >= 0.7;
      d << " seed" << s << ": speed " << e.mean_speed << " dir " << std::setprecision(4) << dirs.back()
        << std::setprecision(6) << ";";
    }
    const double spread = circular_spread(dirs);
    d << " spread " << spread << " deg";
    return fast && spread >= 60.0;
  }));

  out.push_back(checks::timed(6, "distilled student matches the teacher", [&](std::ostringstream& d) {
    if (teachers.empty()) throw std::runtime_error("no teacher");
    TrainConfig c = base;
    c.out_dir = (root / "seed1").string();
    const std::string before = archive_bytes(teachers.front().checkpoint);
    const StageOutput s = run_distill(c);
    const bool unchanged = archive_bytes(teachers.front().checkpoint) == before;
    d << " holdout KL " << s.distill.mean_kl << ", max action deviation " << s.distill.max_action_deviation
      << ", steps " << s.learner_steps << ", teacher " << (unchanged ? "unchanged" : "CHANGED");
    return s.distill.mean_kl < 0.05 && s.distill.max_action_deviation < 0.05 && unchanged;
  }));

  out.push_back(checks::timed(6, "finetuned student reaches the sink on difficulty 2", [&](std::ostringstream& d) {
    TrainConfig c = base;
    c.out_dir = (root / "seed1").string();
    c.difficulty = 2;
    c.eval_difficulty = 2;
    c.total_env_steps = o.quick ? 20000 : 500000;
    const StageOutput f = run_finetune(c, [&](const MetricsRow& r) { log_epoch("finetune", r); });
    const auto rows = read_metrics_csv(f.metrics);
    double best = 0;
    for (const auto& r : rows) best = std::max(best, r.eval_sink_reach);
    d << " final sink reach " << f.eval.sink_reach_fraction << " over " << f.eval.episodes << " episodes (best epoch "
      << best << "), first epoch store size " << (rows.empty() ? -1 : rows.front().store_size);
    return f.eval.sink_reach_fraction >= 0.8;
  }));

  out.push_back(checks::timed(6, "sink reach baselines", [&](std::ostringstream& d) {
    TrainConfig c = base;
    c.stage = Stage::finetune;
    apply_stage(c);
    const EnvConfig env = env_config(c);
    const EvalReport oracle = evaluate(follow_field, env, 2, 20, 777);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    Controller random = [&](const StepResult&) { return Vec2(u(rng), u(rng)).eval(); };
    const EvalReport rnd = evaluate(random, env, 2, 20, 777);
    d << " field follower " << oracle.sink_reach_fraction << ", uniform random " << rnd.sink_reach_fraction;
    return oracle.sink_reach_fraction == 1.0 && rnd.sink_reach_fraction <= 0.1;
  }));
  return out;
}

std::vector<CheckResult> cli_smoke(const Options& o) {
  return {checks::timed(8, "pretrain, distill, finetune and eval through the CLI", [&](std::ostringstream& d) {
    const auto dir = o.work_dir / "cli";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const std::string common = " --config \"" + o.tiny_config.string() + "\" --out_dir \"" + dir.string() + "\"";
    const std::vector<std::pair<std::string, std::string>> steps = {
        {"pretrain", "pretrain" + common},
        {"distill", "distill" + common},
        {"finetune", "finetune" + common},
        {"eval", "eval" + common + " --eval_difficulty 1"},
    };
    bool ok = true;
    for (const auto& [name, args] : steps) {
      const auto log = dir / (name + ".log");
      const std::string cmd = "\"" + o.cli.string() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
      const int status = std::system(cmd.c_str());
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
      d << " " << name << "=" << code;
      ok = ok && code == 0;
    }
    const auto bad = "\"" + o.cli.string() + "\" pretrain --config \"" + o.tiny_config.string() +
                     "\" --no_such_key 1 > /dev/null 2>&1";
    const int status = std::system(bad.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    d << "; unknown flag exit " << code;
    for (const char* f : {"teacher.manifest", "replay.manifest", "student.manifest", "finetuned.manifest",
                          "pretrain_metrics.csv", "distill_metrics.csv", "finetune_metrics.csv"})
      if (!std::filesystem::exists(dir / f)) {
        d << "; missing " << f;
        ok = false;
      }
    return ok && code == 1;
  })};
}

const std::map<int, std::string> kNames = {
    {1, "formula oracles"},         {2, "gradient suite"},       {3, "replay suite"},
    {4, "distribution suite"},      {5, "MVRR structural suite"}, {6, "learning smoke"},
    {7, "reproducibility"},         {8, "end-to-end CLI smoke"},
};

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"acceptance criteria 1-8"};
  Options o;
  std::vector<int> criteria{1, 2, 3, 4, 5, 6, 7, 8};
  app.add_option("--criteria", criteria, "criteria to run")->delimiter(',');
  app.add_option("--work_dir", o.work_dir, "scratch directory");
  app.add_option("--desk_config", o.desk_config, "learning smoke configuration");
  app.add_option("--tiny_config", o.tiny_config, "CLI smoke configuration");
  app.add_option("--cli", o.cli, "vecsac binary");
  app.add_option("--seeds", o.seeds, "pretrain seeds");
  app.add_flag("--quick", o.quick, "fewer instances and shorter learning runs");
  CLI11_PARSE(app, argc, argv);

  checks::CheckOptions copt;
  copt.quick = o.quick;
  copt.work_dir = o.work_dir / "checks";
  std::filesystem::create_directories(o.work_dir);

  using Suite = std::function<std::vector<CheckResult>()>;
  const std::map<int, Suite> suites = {
      {1, [&] { return checks::formula_oracles(copt); }},
      {2, [&] { return checks::gradient_suite(copt); }},
      {3, [&] { return checks::replay_suite(copt); }},
      {4, [&] { return checks::distribution_suite(copt); }},
      {5, [&] { return checks::mvrr_suite(copt); }},
      {6, [&] { return learning_smoke(o); }},
      {7, [&] { return checks::reproducibility_suite(copt); }},
      {8, [&] { return cli_smoke(o); }},
  };

  bool all = true;
  for (int c : std::set<int>(criteria.begin(), criteria.end())) {
    auto it = suites.find(c);
    if (it == suites.end()) {
      std::cerr << "unknown criterion " << c << '\n';
      return 1;
    }
    std::vector<CheckResult> results;
    try {
      results = it->second();
    } catch (const std::exception& e) {
      results.push_back({c, kNames.at(c), false, std::string("exception: ") + e.what(), 0});
    }
    bool ok = !results.empty();
    double seconds = 0;
    for (const auto& r : results) {
      std::cout << "  " << (r.passed ? "ok   " : "FAIL ") << r.name << ":" << r.detail << " (" << std::fixed
                << std::setprecision(1) << r.seconds << " s)" << std::defaultfloat << '\n';
      ok = ok && r.passed;
      seconds += r.seconds;
    }
    std::ostringstream line;
    line << (ok ? "PASS" : "FAIL") << " criterion " << c << " " << kNames.at(c) << " (" << results.size()
         << " checks, " << std::fixed << std::setprecision(1) << seconds << " s)";
    std::cout << line.str() << '\n' << std::flush;
    all = all && ok;
  }
  return all ? 0 : 3;
}
