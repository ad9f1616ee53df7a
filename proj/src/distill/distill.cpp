#include "vecsac/distill/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "vecsac/grad/builders.hpp"
#include "vecsac/key_value.hpp"

namespace vecsac {

namespace {

/// Copy of `net` whose first linear layer gains `extra` input columns
/// inserted at `at`, drawn from Uniform(-scale, scale).
Network<double> widen_input(const Network<double>& net, Index at, Index extra, double scale, Rng& rng) {
  std::vector<LayerSpec> layers = net.layers();
  if (layers.front().kind != LayerKind::linear) throw ConfigError("network must start with a linear layer");
  layers.front().in_dim += extra;
  Network<double> out(layers);
  for (std::size_t i = 0; i < net.block_count(); ++i) out.block_mut(i) = net.block(i);
  const std::size_t first = net.block_of_layer(0);
  const auto& src = net.block(first);
  auto& dst = out.block_mut(first);
  const Index in = src.weights.cols();
  dst.weights.resize(src.weights.rows(), in + extra);
  dst.weights.leftCols(at) = src.weights.leftCols(at);
  dst.weights.rightCols(in - at) = src.weights.rightCols(in - at);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Index r = 0; r < dst.weights.rows(); ++r)
    for (Index c = at; c < at + extra; ++c) dst.weights(r, c) = scale > 0 ? u(rng) : 0.0;
  dst.weight_grad = MatrixXd::Zero(dst.weights.rows(), dst.weights.cols());
  dst.adam_m_w = MatrixXd::Zero(dst.weights.rows(), dst.weights.cols());
  dst.adam_v_w = MatrixXd::Zero(dst.weights.rows(), dst.weights.cols());
  dst.adam_m_b.setZero();
  dst.adam_v_b.setZero();
  dst.step_count = 0;
  for (std::size_t i = 0; i < out.block_count(); ++i) {
    if (i == first) continue;
    auto& b = out.block_mut(i);
    b.adam_m_w.setZero();
    b.adam_v_w.setZero();
    b.adam_m_b.setZero();
    b.adam_v_b.setZero();
    b.step_count = 0;
  }
  return out;
}

MatrixXd student_input(const MatrixXd& states, const MatrixXd& field) {
  if (field.rows() != states.rows()) throw ConfigError("field batch does not match state batch");
  return hstack(states, field);
}

}  // namespace

SacAgent build_student(const SacAgent& teacher, Index field_dim, Index student_hidden, Rng& rng) {
  if (field_dim < 0 || student_hidden <= 0) throw ConfigError("student dimensions must be positive");
  const Index obs = teacher.actor.input_dim();
  const Index act = teacher.actor.output_dim() / 2;
  if (teacher.critics.q1.input_dim() != obs + act)
    throw ConfigError("teacher critic input " + std::to_string(teacher.critics.q1.input_dim()) +
                      " does not equal obs + action " + std::to_string(obs + act));
  SacAgent s = SacAgent::create(obs + field_dim, act, student_hidden, teacher.critics.n_terms(), 1.0, rng);
  s.log_alpha.weights = teacher.log_alpha.weights;
  return s;
}

SacAgent clone_teacher_as_student(const SacAgent& teacher, Index field_dim, double field_scale, Rng& rng) {
  const Index obs = teacher.actor.input_dim();
  SacAgent s;
  s.actor = widen_input(teacher.actor, obs, field_dim, field_scale, rng);
  Network<double> q1 = widen_input(teacher.critics.q1, obs, field_dim, field_scale, rng);
  Network<double> q2 = widen_input(teacher.critics.q2, obs, field_dim, field_scale, rng);
  s.critics = CriticEnsemble::from_online(std::move(q1), std::move(q2));
  s.log_alpha.weights = teacher.log_alpha.weights;
  return s;
}

DistillStates collect_states(const PrioritizedStore& store, double holdout_fraction, Rng& rng) {
  if (!(holdout_fraction >= 0 && holdout_fraction < 1)) throw ConfigError("holdout_fraction must lie in [0, 1)");
  const auto segs = store.segments();
  if (segs.empty()) throw ConfigError("replay snapshot holds no segments");
  std::vector<std::uint64_t> episodes;
  for (const auto& s : segs) episodes.push_back(s->episode_id);
  std::sort(episodes.begin(), episodes.end());
  episodes.erase(std::unique(episodes.begin(), episodes.end()), episodes.end());
  std::shuffle(episodes.begin(), episodes.end(), rng);
  std::size_t n_hold = static_cast<std::size_t>(holdout_fraction * static_cast<double>(episodes.size()) + 0.5);
  if (holdout_fraction > 0 && n_hold == 0 && episodes.size() > 1) n_hold = 1;
  if (n_hold >= episodes.size() && holdout_fraction > 0) n_hold = episodes.size() - 1;
  const std::set<std::uint64_t> hold(episodes.begin(), episodes.begin() + static_cast<std::ptrdiff_t>(n_hold));

  std::set<std::pair<std::uint64_t, std::int64_t>> seen;
  std::vector<VectorXd> train, holdout;
  for (const auto& s : segs) {
    for (Index t = 0; t < s->length; ++t) {
      if (!seen.insert({s->episode_id, s->start_index + t}).second) continue;
      (hold.count(s->episode_id) ? holdout : train).push_back(s->obs.row(t).transpose());
    }
  }
  const Index d = segs.front()->obs.cols();
  DistillStates out;
  out.train.resize(static_cast<Index>(train.size()), d);
  out.holdout.resize(static_cast<Index>(holdout.size()), d);
  for (std::size_t i = 0; i < train.size(); ++i) out.train.row(i) = train[i].transpose();
  for (std::size_t i = 0; i < holdout.size(); ++i) out.holdout.row(i) = holdout[i].transpose();
  return out;
}

double distill_kl_loss(Network<double>& student, const Network<double>& teacher, const MatrixXd& states,
                       const MatrixXd& field) {
  const MatrixXd t_out = teacher.forward(states);
  Tape<double> tape;
  const MatrixXd s_out = student.forward(student_input(states, field), &tape);
  MatrixXd d;
  const VectorXd kl = kl_batch<double>(s_out, t_out, &d);
  const double p = static_cast<double>(states.rows());
  const double loss = kl.mean();
  if (!std::isfinite(loss)) throw NumericFault("non-finite distillation KL");
  student.backward(tape, d / p);
  return loss;
}

double distill_q_loss(CriticEnsemble& student, const CriticEnsemble& teacher, const Network<double>& student_actor,
                      const Network<double>& teacher_actor, const VectorXd& weights, const MatrixXd& states,
                      const MatrixXd& field, const MatrixXd& noise_s, const MatrixXd& noise_t,
                      bool per_coordinate) {
  const Index n = student.n_terms();
  if (teacher.n_terms() != n || weights.size() != n) throw ConfigError("head count mismatch in critic distillation");
  const MatrixXd s_in = student_input(states, field);
  const MatrixXd a_s = sample_batch<double>(student_actor.forward(s_in), noise_s).action;
  const MatrixXd a_t = sample_batch<double>(teacher_actor.forward(states), noise_t).action;
  const MatrixXd xs = hstack(s_in, a_s);
  const MatrixXd xt = hstack(states, a_t);
  const double p = static_cast<double>(states.rows());
  double loss = 0;
  std::pair<Network<double>*, const Network<double>*> twins[] = {{&student.q1, &teacher.q1},
                                                                 {&student.q2, &teacher.q2}};
  for (auto [qs, qt] : twins) {
    Tape<double> tape;
    const MatrixXd out_s = qs->forward(xs, &tape);
    const MatrixXd out_t = qt->forward(xt);
    MatrixXd g;
    if (per_coordinate) {
      const MatrixXd diff = out_s - out_t;
      loss += diff.array().square().sum() / p;
      g = 2.0 * diff / p;
    } else {
      const VectorXd diff = (out_s - out_t) * weights;
      loss += diff.squaredNorm() / p;
      g = (2.0 / p) * diff * weights.transpose();
    }
    qs->backward(tape, g);
  }
  if (!std::isfinite(loss)) throw NumericFault("non-finite critic distillation loss");
  return loss;
}

DistillLosses distill_step(SacAgent& student, const SacAgent& teacher, const VectorXd& weights,
                           const MatrixXd& train_states, Rng& rng, const DistillConfig& cfg) {
  if (!(cfg.noise_std >= 0)) throw ConfigError("noise_std must be non-negative");
  if (cfg.batch <= 0 || train_states.rows() == 0) throw ConfigError("distillation needs a positive batch and states");
  const Index field_dim = student.actor.input_dim() - teacher.actor.input_dim();
  const Index act = teacher.actor.output_dim() / 2;
  std::uniform_int_distribution<Index> pick(0, train_states.rows() - 1);
  std::vector<Index> idx(static_cast<std::size_t>(cfg.batch));
  MatrixXd states(cfg.batch, train_states.cols());
  for (Index i = 0; i < cfg.batch; ++i) {
    idx[i] = pick(rng);
    states.row(i) = train_states.row(idx[i]);
  }
  MatrixXd field = MatrixXd::Zero(cfg.batch, field_dim);
  if (cfg.noise_std > 0) field = cfg.noise_std * standard_normal<double>(cfg.batch, field_dim, rng);
  const MatrixXd noise_s = standard_normal<double>(cfg.batch, act, rng);
  const MatrixXd noise_t = standard_normal<double>(cfg.batch, act, rng);

  student.actor.zero_grad();
  student.critics.q1.zero_grad();
  student.critics.q2.zero_grad();
  DistillLosses l;
  try {
    l.kl_loss = distill_kl_loss(student.actor, teacher.actor, states, field);
    l.q_loss = distill_q_loss(student.critics, teacher.critics, student.actor, teacher.actor, weights, states, field,
                              noise_s, noise_t, cfg.per_coordinate_q);
  } catch (const NumericFault& e) {
    std::string ids;
    for (Index i : idx) ids += ' ' + std::to_string(i);
    student.actor.zero_grad();
    student.critics.q1.zero_grad();
    student.critics.q2.zero_grad();
    throw NumericFault(std::string(e.what()) + "; state rows:" + ids);
  }
  const AdamOptions opt{cfg.lr};
  adam_step(student.actor, opt);
  adam_step(student.critics.q1, opt);
  adam_step(student.critics.q2, opt);
  return l;
}

DistillReport verify_distillation(const SacAgent& student, const SacAgent& teacher, const MatrixXd& holdout,
                                  double kl_threshold, double eps_action) {
  DistillReport r;
  r.states = holdout.rows();
  if (holdout.rows() == 0) return r;
  const Index field_dim = student.actor.input_dim() - teacher.actor.input_dim();
  const MatrixXd s_out = student.actor.forward(hstack(holdout, MatrixXd::Zero(holdout.rows(), field_dim)));
  const MatrixXd t_out = teacher.actor.forward(holdout);
  const Index a = t_out.cols() / 2;
  r.mean_kl = kl_batch<double>(s_out, t_out).mean();
  r.max_action_deviation =
      (s_out.leftCols(a).array().tanh() - t_out.leftCols(a).array().tanh()).abs().maxCoeff();
  r.passed = r.mean_kl < kl_threshold && r.max_action_deviation < eps_action;
  return r;
}

DistillRun run_distillation(SacAgent& student, const SacAgent& teacher, const VectorXd& weights,
                            const DistillStates& states, Rng& rng, const DistillConfig& cfg) {
  DistillRun run;
  std::vector<double> window;
  double window_sum = 0;
  DistillConfig step_cfg = cfg;
  const double decay = cfg.lr_final > 0 && cfg.max_steps > 1
                           ? std::pow(cfg.lr_final / cfg.lr, 1.0 / static_cast<double>(cfg.max_steps - 1))
                           : 1.0;
  for (Index step = 1; step <= cfg.max_steps; ++step) {
    const DistillLosses l = distill_step(student, teacher, weights, states.train, rng, step_cfg);
    step_cfg.lr *= decay;
    run.rows.push_back({static_cast<double>(step), l.kl_loss, l.q_loss});
    window.push_back(l.kl_loss);
    window_sum += l.kl_loss;
    if (static_cast<Index>(window.size()) > cfg.kl_window) {
      window_sum -= window.front();
      window.erase(window.begin());
    }
    if (static_cast<Index>(window.size()) == cfg.kl_window && window_sum / cfg.kl_window < cfg.kl_stop) break;
  }
  student.critics.q1_target = student.critics.q1;
  student.critics.q2_target = student.critics.q2;
  run.report = verify_distillation(student, teacher, states.holdout, cfg.kl_threshold, cfg.eps_action);
  return run;
}

void write_distill_csv(const std::filesystem::path& path, const DistillRun& run) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "step,kl_loss,q_loss\n";
  for (const auto& r : run.rows)
    out << static_cast<long long>(r[0]) << ',' << format_double(r[1]) << ',' << format_double(r[2]) << '\n';
}

}  // namespace vecsac
