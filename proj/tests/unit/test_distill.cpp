#include <doctest.h>

#include <algorithm>
#include <bit>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>

#include "checks/oracles.hpp"
#include "vecsac/distill/distill.hpp"
#include "vecsac/env/velocity_env.hpp"
#include "vecsac/grad/builders.hpp"

using namespace vecsac;

namespace {

bool networks_bit_equal(const Network<double>& a, const Network<double>& b) {
  if (!a.same_architecture(b)) return false;
  for (std::size_t i = 0; i < a.block_count(); ++i) {
    const auto& x = a.block(i);
    const auto& y = b.block(i);
    for (Index k = 0; k < x.weights.size(); ++k)
      if (std::bit_cast<std::uint64_t>(x.weights.data()[k]) != std::bit_cast<std::uint64_t>(y.weights.data()[k]))
        return false;
    for (Index k = 0; k < x.bias.size(); ++k)
      if (std::bit_cast<std::uint64_t>(x.bias[k]) != std::bit_cast<std::uint64_t>(y.bias[k])) return false;
  }
  return true;
}

bool agents_bit_equal(const SacAgent& a, const SacAgent& b) {
  return networks_bit_equal(a.actor, b.actor) && networks_bit_equal(a.critics.q1, b.critics.q1) &&
         networks_bit_equal(a.critics.q2, b.critics.q2) && networks_bit_equal(a.critics.q1_target, b.critics.q1_target) &&
         networks_bit_equal(a.critics.q2_target, b.critics.q2_target) &&
         a.log_alpha.weights(0, 0) == b.log_alpha.weights(0, 0);
}

SacAgent toy_teacher(Index obs, Index act, Index terms, Rng& rng) {
  SacAgent t = SacAgent::create(obs, act, 16, terms, 0.1, rng);
  init_params(t.actor, rng, 0.5);
  init_params(t.critics.q1, rng, 0.5);
  init_params(t.critics.q2, rng, 0.5);
  return t;
}

std::unique_ptr<PrioritizedStore> store_with_episodes(Rng& rng, int episodes) {
  StoreConfig cfg;
  cfg.capacity = 1024;
  auto store = std::make_unique<PrioritizedStore>(cfg);
  for (int e = 0; e < episodes; ++e)
    for (int k = 0; k < 4; ++k) {
      Segment s = checks::random_segment(rng, 10, 5, 3, 2, 3, false);
      s.episode_id = 500 + e;
      s.start_index = 5 * k;
      for (Index r = 0; r < s.obs.rows(); ++r) {
        s.obs(r, 0) = double(e);
        s.obs(r, 1) = double(5 * k + r);
      }
      store->append(std::move(s));
    }
  return store;
}

}  // namespace

TEST_SUITE("distill") {
  TEST_CASE("student dimensions") {
    Rng rng(1);
    const SacAgent teacher = SacAgent::create(kTeacherObsDim, kActionDim, 16, kNumRewardTerms, 0.1, rng);
    const SacAgent s = build_student(teacher, kFieldDim, 32, rng);
    CHECK(s.actor.input_dim() == 248);
    CHECK(s.critics.q1.input_dim() == 250);
    CHECK(s.critics.q2_target.input_dim() == 250);
    CHECK(s.critics.n_terms() == 7);
    CHECK(s.actor.output_dim() == 4);
    CHECK(s.alpha() == teacher.alpha());
    const MatrixXd out = s.actor.forward(hstack(standard_normal<double>(3, 6, rng), MatrixXd::Zero(3, kFieldDim)));
    CHECK(out.allFinite());
    CHECK(out.rows() == 3);

    const SacAgent same = build_student(teacher, 0, 16, rng);
    CHECK(same.actor.input_dim() == teacher.actor.input_dim());
    CHECK(same.critics.q1.input_dim() == teacher.critics.q1.input_dim());
    CHECK_THROWS_AS(build_student(teacher, -1, 16, rng), ConfigError);
  }

  TEST_CASE("a teacher clone with a silent field pathway starts at zero KL") {
    Rng rng(2);
    const SacAgent teacher = toy_teacher(6, 2, 7, rng);
    SacAgent clone = clone_teacher_as_student(teacher, kFieldDim, 0.0, rng);
    const MatrixXd states = standard_normal<double>(200, 6, rng);
    DistillConfig cfg;
    cfg.batch = 64;
    const DistillLosses l = distill_step(clone, teacher, pretrain_weights(), states, rng, cfg);
    CHECK(std::abs(l.kl_loss) < 1e-12);
    const SacAgent fresh = clone_teacher_as_student(teacher, kFieldDim, 0.0, rng);
    const DistillReport r = verify_distillation(fresh, teacher, states, 0.05, 0.05);
    CHECK(r.mean_kl < 1e-24);
    CHECK(r.max_action_deviation < 1e-12);
    CHECK(r.passed);
  }

  TEST_CASE("zero noise std feeds a zero field") {
    Rng rng(3);
    const SacAgent teacher = toy_teacher(6, 2, 7, rng);
    const MatrixXd states = standard_normal<double>(100, 6, rng);
    DistillConfig cfg;
    cfg.batch = 32;
    cfg.noise_std = 0.0;
    // field weights are large, so any nonzero field input would show up in the KL
    SacAgent s = clone_teacher_as_student(teacher, kFieldDim, 1.0, rng);
    CHECK(distill_step(s, teacher, pretrain_weights(), states, rng, cfg).kl_loss < 1e-12);
    cfg.noise_std = 0.1;
    SacAgent s2 = clone_teacher_as_student(teacher, kFieldDim, 1.0, rng);
    CHECK(distill_step(s2, teacher, pretrain_weights(), states, rng, cfg).kl_loss > 1e-4);
  }

  TEST_CASE("random student fails verification") {
    Rng rng(4);
    const SacAgent teacher = toy_teacher(6, 2, 7, rng);
    SacAgent s = build_student(teacher, kFieldDim, 16, rng);
    init_params(s.actor, rng, 1.0);
    const DistillReport r = verify_distillation(s, teacher, standard_normal<double>(100, 6, rng), 0.05, 0.05);
    CHECK_FALSE(r.passed);
    CHECK(r.states == 100);
  }

  TEST_CASE("student converges to a constant teacher") {
    Rng rng(5);
    SacAgent teacher = SacAgent::create(1, 1, 8, 2, 0.1, rng);
    for (auto* net : {&teacher.actor, &teacher.critics.q1, &teacher.critics.q2})
      for (std::size_t i = 0; i < net->block_count(); ++i) net->block_mut(i).weights.setZero();
    const std::size_t last = output_block(teacher.actor);
    teacher.actor.block_mut(last).bias << 0.4, -1.0;
    const SacAgent frozen = teacher;
    SacAgent student = build_student(teacher, 1, 8, rng);
    const MatrixXd states = standard_normal<double>(256, 1, rng);
    DistillConfig cfg;
    cfg.batch = 64;
    cfg.lr = 1e-3;
    double kl = 1;
    for (int step = 0; step < 2000; ++step) {
      const DistillLosses l = distill_step(student, teacher, Vec2(1, 1), states, rng, cfg);
      CHECK(l.kl_loss > -1e-12);
      CHECK(l.q_loss >= 0);
      kl = l.kl_loss;
    }
    MESSAGE("final KL ", kl);
    CHECK(kl < 1e-4);
    CHECK(agents_bit_equal(teacher, frozen));
  }

  TEST_CASE("states are split by episode without duplicates") {
    Rng rng(6);
    const auto store = store_with_episodes(rng, 20);
    const DistillStates st = collect_states(*store, 0.1, rng);
    CHECK(st.train.rows() + st.holdout.rows() == 20 * 25);
    CHECK(st.holdout.rows() == 2 * 25);
    std::set<double> train_eps, hold_eps;
    std::set<std::pair<double, double>> seen;
    for (Index r = 0; r < st.train.rows(); ++r) {
      train_eps.insert(st.train(r, 0));
      CHECK(seen.insert({st.train(r, 0), st.train(r, 1)}).second);
    }
    for (Index r = 0; r < st.holdout.rows(); ++r) {
      hold_eps.insert(st.holdout(r, 0));
      CHECK(seen.insert({st.holdout(r, 0), st.holdout(r, 1)}).second);
    }
    for (double e : hold_eps) CHECK(train_eps.count(e) == 0);
    CHECK_THROWS_AS(collect_states(*store, 1.0, rng), ConfigError);
  }

  TEST_CASE("learning rate decays geometrically to the final value") {
    Rng rng(11);
    const auto store = store_with_episodes(rng, 6);
    const SacAgent teacher = toy_teacher(3, 2, 3, rng);
    const SacAgent init = build_student(teacher, 4, 16, rng);
    const DistillStates states = collect_states(*store, 0.0, rng);
    DistillConfig cfg;
    cfg.batch = 16;
    cfg.lr = 1e-3;
    auto run = [&](Index steps, double lr_final) {
      SacAgent s = init;
      Rng r(5);
      DistillConfig c = cfg;
      c.max_steps = steps;
      c.lr_final = lr_final;
      run_distillation(s, teacher, Vec3(1, 10, 0), states, r, c);
      return s;
    };
    const SacAgent one = run(1, 0);
    const SacAgent two_decayed = run(2, 1e-9);
    const SacAgent two_flat = run(2, 0);
    CHECK(networks_bit_equal(run(2, cfg.lr).actor, two_flat.actor));
    double moved_decayed = 0, moved_flat = 0;
    for (std::size_t i = 0; i < one.actor.block_count(); ++i) {
      moved_decayed = std::max(moved_decayed,
                               (two_decayed.actor.block(i).weights - one.actor.block(i).weights).cwiseAbs().maxCoeff());
      moved_flat =
          std::max(moved_flat, (two_flat.actor.block(i).weights - one.actor.block(i).weights).cwiseAbs().maxCoeff());
    }
    CHECK(moved_decayed < 1e-7);
    CHECK(moved_flat > 1e-4);
  }

  TEST_CASE("full run on stored states passes verification and leaves the teacher alone") {
    Rng rng(7);
    const auto store = store_with_episodes(rng, 20);
    const SacAgent teacher = toy_teacher(3, 2, 3, rng);
    const SacAgent frozen = teacher;
    SacAgent student = build_student(teacher, 4, 32, rng);
    DistillConfig cfg;
    cfg.batch = 64;
    cfg.lr = 1e-3;
    cfg.max_steps = 4000;
    cfg.kl_stop = 1e-5;
    const DistillStates states = collect_states(*store, 0.1, rng);
    const DistillRun run = run_distillation(student, teacher, Vec3(1, 10, 0), states, rng, cfg);
    MESSAGE("steps ", run.rows.size(), " holdout KL ", run.report.mean_kl, " deviation ",
            run.report.max_action_deviation);
    CHECK(run.report.passed);
    CHECK(agents_bit_equal(teacher, frozen));
    CHECK(networks_bit_equal(student.critics.q1_target, student.critics.q1));
    for (const auto& r : run.rows) {
      CHECK(r[1] >= 0);
      CHECK(r[2] >= 0);
    }
    const auto path = std::filesystem::temp_directory_path() / "vecsac_unit_distill.csv";
    write_distill_csv(path, run);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,kl_loss,q_loss");
    std::filesystem::remove(path);
  }
}
