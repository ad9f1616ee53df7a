#include "vecsac/pipeline/metrics.hpp"

#include <charconv>
#include <fstream>

#include "vecsac/errors.hpp"
#include "vecsac/key_value.hpp"

namespace vecsac {

namespace {

constexpr int kColumns = 3 + 2 + kNumRewardTerms + 2 + 7 + 1;

std::vector<double> flatten(const MetricsRow& r) {
  std::vector<double> v = {r.wall_time, double(r.env_steps), double(r.learner_steps), r.eval_env_reward_mean,
                           r.eval_env_reward_std};
  for (int i = 0; i < kNumRewardTerms; ++i) v.push_back(r.eval_term_sums[i]);
  for (double x : {r.eval_sink_reach, r.eval_mean_speed, r.critic_loss, r.actor_loss, r.temperature_loss, r.alpha,
                   r.entropy, r.priority_mean, r.priority_max, double(r.store_size)})
    v.push_back(x);
  return v;
}

}  // namespace

std::string metrics_header() {
  std::string h = "wall_time,env_steps,learner_steps,eval_env_reward_mean,eval_env_reward_std";
  for (auto name : kRewardTermNames) h += ",eval_sum_" + std::string(name);
  h += ",eval_sink_reach,eval_mean_speed,critic_loss,actor_loss,temperature_loss,alpha,entropy,"
       "priority_mean,priority_max,store_size";
  return h;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << metrics_header() << '\n';
  for (const auto& r : rows) {
    const auto v = flatten(r);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out << ',';
      if (i == 1 || i == 2 || i + 1 == v.size())
        out << static_cast<long long>(v[i]);
      else
        out << format_double(v[i]);
    }
    out << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != metrics_header())
    throw ConfigError(path.string() + ": unexpected metrics header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto parts = split(line, ',');
    if (static_cast<int>(parts.size()) != kColumns) throw ConfigError(path.string() + ": wrong column count");
    std::vector<double> v;
    for (const auto& p : parts) {
      double x = 0;
      const auto [end, ec] = std::from_chars(p.data(), p.data() + p.size(), x);
      if (ec != std::errc() || end != p.data() + p.size()) throw ConfigError(path.string() + ": bad number '" + p + "'");
      v.push_back(x);
    }
    MetricsRow r;
    std::size_t k = 0;
    r.wall_time = v[k++];
    r.env_steps = static_cast<std::int64_t>(v[k++]);
    r.learner_steps = static_cast<std::int64_t>(v[k++]);
    r.eval_env_reward_mean = v[k++];
    r.eval_env_reward_std = v[k++];
    for (int i = 0; i < kNumRewardTerms; ++i) r.eval_term_sums[i] = v[k++];
    r.eval_sink_reach = v[k++];
    r.eval_mean_speed = v[k++];
    r.critic_loss = v[k++];
    r.actor_loss = v[k++];
    r.temperature_loss = v[k++];
    r.alpha = v[k++];
    r.entropy = v[k++];
    r.priority_mean = v[k++];
    r.priority_max = v[k++];
    r.store_size = static_cast<std::int64_t>(v[k++]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace vecsac
