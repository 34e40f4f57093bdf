#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctr/errors.hpp"
#include "ctr/eval.hpp"
#include "ctr/plot.hpp"

using namespace ctr;
using namespace ctr::eval;

namespace {

EnvConfig env_for(std::vector<CtrSystem> systems) {
  EnvConfig cfg;
  cfg.systems = std::move(systems);
  cfg.max_episode_steps = 20;
  return cfg;
}

plot::Table load(const std::filesystem::path& p) {
  std::ifstream in(p);
  return plot::read_csv(in);
}

}  // namespace

TEST_CASE("oracle and random agents bracket the metric") {
  const auto cfg = env_for({reference_system(3)});
  EvalOptions opts;
  opts.episodes = 100;
  opts.seed = 11;
  const auto oracle = evaluate_ik(oracle_agent(), cfg, opts);
  REQUIRE(oracle.episodes.size() == 100);
  CHECK(oracle.success_rate() == 1.0);
  CHECK(oracle.mean_error() < 1e-9);
  const auto random = evaluate_ik(random_agent(), cfg, opts);
  CHECK(random.success_rate() < 0.1);
  CHECK(random.mean_error() > 10.0);
  for (const auto& e : random.episodes) {
    CHECK(e.steps == 20);
    CHECK(e.success == (e.error < kSuccessThreshold));
    CHECK(e.initial_distance == doctest::Approx((e.start_tip - e.desired).norm()));
  }
}

TEST_CASE("evaluation is deterministic and independent of worker count") {
  const auto cfg = env_for(reference_systems());
  EvalOptions opts;
  opts.episodes = 24;
  opts.seed = 5;
  const auto one = evaluate_ik(random_agent(), cfg, opts);
  opts.workers = 4;
  const auto four = evaluate_ik(random_agent(), cfg, opts);
  REQUIRE(one.episodes.size() == four.episodes.size());
  for (std::size_t i = 0; i < one.episodes.size(); ++i) {
    CHECK(one.episodes[i].error == four.episodes[i].error);
    CHECK(one.episodes[i].system_index == four.episodes[i].system_index);
  }
  opts.system_index = 2;
  const auto pinned = evaluate_ik(random_agent(), cfg, opts);
  for (const auto& e : pinned.episodes) CHECK(e.system_index == 2);
  CHECK(pinned.for_system(2).episodes.size() == 24);
  CHECK(std::isnan(pinned.for_system(1).mean_error()));
}

TEST_CASE("checkpoint evaluation checks dimensions") {
  rl::Checkpoint ck;
  ck.obs_dim = 14;
  ck.actor = rl::Net({14, 4, 6}, rl::Activation::Relu, rl::Activation::Tanh);
  ck.critic = rl::Net({20, 4, 1}, rl::Activation::Relu, rl::Activation::Identity);
  ck.normalizer = rl::Normalizer(14);
  EvalOptions opts;
  opts.episodes = 2;
  CHECK_THROWS_AS(evaluate_ik(ck, env_for({reference_system(0)}), opts), DimensionMismatch);
  CHECK(evaluate_ik(ck, env_for({reference_system(0), reference_system(1)}), opts).episodes.size() == 2);
}

TEST_CASE("report csv round trip") {
  const auto cfg = env_for({reference_system(1), reference_system(2)});
  EvalOptions opts;
  opts.episodes = 10;
  opts.seed = 3;
  const auto r = evaluate_ik(random_agent(), cfg, opts);
  std::stringstream ss;
  write_report_csv(r, ss);
  const auto back = read_report_csv(ss);
  REQUIRE(back.episodes.size() == 10);
  CHECK(back.step_budget == r.step_budget);
  CHECK(back.seed == 3);
  CHECK(back.mean_error() == doctest::Approx(r.mean_error()).epsilon(1e-12));
  CHECK(back.success_rate() == r.success_rate());
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK((back.episodes[i].final_q.alpha - r.episodes[i].final_q.alpha).norm() < 1e-12);
    CHECK(back.episodes[i].system_index == r.episodes[i].system_index);
  }
}

TEST_CASE("error regression") {
  CHECK_THROWS_AS(fit_line({1, 1, 1}, {1, 2, 3}), DegenerateFit);
  CHECK_THROWS_AS(fit_line({1}, {1}), DegenerateFit);
  const auto f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));

  Rng rng(2);
  std::normal_distribution<double> noise(0, 0.1);
  IkEvalReport r;
  for (int i = 0; i < 2000; ++i) {
    EpisodeRecord e;
    e.initial_distance = i * 0.1;
    e.error = 0.01 * e.initial_distance + 0.3 + noise(rng);
    r.episodes.push_back(e);
  }
  const auto g = error_regression(r);
  CHECK(g.slope == doctest::Approx(0.01).epsilon(0.05));
  CHECK(g.intercept == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("workspace export") {
  IkEvalReport r;
  for (int i = 0; i < 10; ++i) {
    EpisodeRecord e;
    e.error = i * 0.5;
    e.achieved = {double(i), 0, 1};
    e.final_q.alpha = {deg2rad(190.0), deg2rad(-30.0), 0};
    r.episodes.push_back(e);
  }
  const auto dir = std::filesystem::temp_directory_path() / "ctr_unit_ws";
  std::filesystem::remove_all(dir);
  const auto ex = export_workspace_errors(r, dir, "t");
  CHECK(ex.rows == 10);
  CHECK(ex.filtered_rows == 5);  // 2.5 .. 4.5
  const auto all = load(ex.all);
  CHECK(all.rows.size() == 10);
  CHECK(load(ex.filtered).rows.size() == 5);
  const auto polar = load(ex.polar[0]);
  REQUIRE(polar.rows.size() == 10);
  CHECK(polar.rows[0][0] == doctest::Approx(-170.0));
  std::filesystem::remove_all(dir);
}

TEST_CASE("percent of length") {
  CHECK(percent_of_length(0.68, reference_system(0)) == doctest::Approx(0.157772621809745).epsilon(1e-12));
  CHECK(percent_of_length(1.5, reference_system(3)) == doctest::Approx(1.0));
}
