#include "doctest.h"

#include <cmath>
#include <sstream>

#include "ctr/env.hpp"
#include "ctr/errors.hpp"

using namespace ctr;

namespace {

EnvConfig single(int id = 3) {
  EnvConfig cfg;
  cfg.systems = {reference_system(id)};
  cfg.seed = 21;
  return cfg;
}

}  // namespace

TEST_CASE("curriculum") {
  Curriculum decay{CurriculumKind::Decay, 20.0, 1.0, 1000.0};
  CHECK(tolerance(decay, 0) == doctest::Approx(20.0));
  CHECK(tolerance(decay, 1000) == doctest::Approx(1.0));
  CHECK(tolerance(decay, 500) == doctest::Approx(std::sqrt(20.0)).epsilon(1e-12));
  CHECK(tolerance(decay, 5000) == 1.0);
  CHECK(tolerance(decay, -5) == doctest::Approx(20.0));
  double prev = 1e9;
  for (int t = 0; t <= 1200; t += 10) {
    const double tol = tolerance(decay, t);
    CHECK(tol <= prev);
    CHECK(tol >= 1.0);
    prev = tol;
  }
  Curriculum linear{CurriculumKind::Linear, 20.0, 1.0, 1000.0};
  CHECK(tolerance(linear, 500) == doctest::Approx(10.5));
  CHECK(tolerance(linear, 1000) == doctest::Approx(1.0));
  Curriculum constant{CurriculumKind::Constant, 20.0, 1.0, 1000.0};
  CHECK(tolerance(constant, 0) == 1.0);
}

TEST_CASE("sparse reward boundary") {
  CHECK(sparse_reward(1.0, 1.0) == 0.0);
  CHECK(sparse_reward(std::nextafter(1.0, 2.0), 1.0) == -1.0);
  CHECK(sparse_reward(0.0, 1.0) == 0.0);
}

TEST_CASE("system sampler") {
  const auto systems = reference_systems();
  SystemSampler prop(SamplerKind::LengthProportional, systems);
  CHECK(prop.probabilities()[0] == doctest::Approx(431.0 / 1260.0).epsilon(1e-14));
  CHECK(prop.probabilities()[3] == doctest::Approx(150.0 / 1260.0).epsilon(1e-14));
  SystemSampler uni(SamplerKind::Uniform, systems);
  for (double p : uni.probabilities()) CHECK(p == doctest::Approx(0.25));

  Rng rng(77);
  const int n = 200000;
  std::array<int, 4> counts{};
  for (int k = 0; k < n; ++k) ++counts[prop.sample(rng)];
  for (int i = 0; i < 4; ++i) {
    const double p = prop.probabilities()[i];
    const double sigma = std::sqrt(n * p * (1 - p));
    CHECK(std::abs(counts[i] - n * p) < 3.0 * sigma);
  }
  CHECK_THROWS_AS(SystemSampler(SamplerKind::Uniform, {}), InvalidSpec);
}

TEST_CASE("measurement noise") {
  CHECK(extension_std_from_gear_ratio(1.0) == doctest::Approx(0.017453292519943295).epsilon(1e-12));
  const auto spec = NoiseSpec::defaults();
  JointConfig q;
  q.beta = {-30, -20, -10};
  q.alpha = {0.1, 0.2, 0.3};
  const Eigen::Vector3d g(1, 2, 3);
  Rng rng(5);
  const int n = 100000;
  Eigen::Matrix<double, 9, 1> sum = Eigen::Matrix<double, 9, 1>::Zero(), sumsq = sum;
  for (int k = 0; k < n; ++k) {
    const auto r = observe_with_noise(q, g, spec, rng);
    Eigen::Matrix<double, 9, 1> d;
    d << r.q.alpha - q.alpha, r.q.beta - q.beta, r.achieved_goal - g;
    sum += d;
    sumsq += d.cwiseProduct(d);
  }
  const double stds[3] = {deg2rad(1.0), spec.extension_encoder_std_mm, 0.8};
  for (int i = 0; i < 9; ++i) {
    const double sd = stds[i / 3];
    const double mean = sum[i] / n;
    const double var = sumsq[i] / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 * sd / std::sqrt(n));
    CHECK(std::sqrt(var) == doctest::Approx(sd).epsilon(0.02));
  }
  const auto clean = observe_with_noise(q, g, NoiseSpec::none(), rng);
  CHECK(clean.q.alpha == q.alpha);
  CHECK(clean.achieved_goal == g);
  NoiseSpec bad = spec;
  bad.tracking_std_mm = -1;
  CHECK_THROWS_AS(observe_with_noise(q, g, bad, rng), InvalidSpec);
}

TEST_CASE("observation layout") {
  JointConfig q;
  q.beta = {-30, -20, -10};
  q.alpha = {0.5, 0.75, 1.0};
  const Eigen::Vector3d ga(1, 2, 3), gd(0.5, 0.5, 0.5);
  const auto obs = assemble_observation(q, ga, gd, 4.0, JointFrame::Egocentric);
  REQUIRE(obs.size() == 13);
  CHECK(obs[0] == doctest::Approx(std::cos(0.5)));
  CHECK(obs[2] == -30);
  CHECK(obs[3] == doctest::Approx(std::cos(0.25)));
  CHECK(obs[5] == 10);
  CHECK(obs.segment<3>(kGoalDeltaOffset).isApprox(Eigen::Vector3d(0.5, 1.5, 2.5)));
  CHECK(obs[kToleranceOffset] == 4.0);
  const auto pro = assemble_observation(q, ga, gd, 4.0, JointFrame::Proprioceptive, Eigen::VectorXd::Ones(1));
  REQUIRE(pro.size() == 14);
  CHECK(pro[5] == -20);
  CHECK(pro[13] == 1.0);
}

TEST_CASE("observation dimensions") {
  auto cfg = single();
  CHECK(cfg.observation_dim() == 13);
  cfg.systems = reference_systems();
  CHECK(cfg.observation_dim() == 14);
  cfg.system_encoding = SystemEncoding::OneHot;
  CHECK(cfg.observation_dim() == 17);
  cfg.include_system_id = false;
  CHECK(cfg.observation_dim() == 13);

  EnvConfig two;
  two.systems = {reference_system(2), reference_system(3)};
  CtrEnv env(two);
  env.pin_system(1);
  auto obs = env.reset();
  CHECK(obs.size() == 14);
  CHECK(obs[13] == 1.0);
  env.pin_system(0);
  obs = env.reset();
  CHECK(obs[13] == 0.0);
}

TEST_CASE("episode dynamics") {
  auto cfg = single();
  cfg.max_episode_steps = 5;
  CtrEnv env(cfg);
  env.set_fixed_tolerance(1e-9);
  const auto obs0 = env.reset();
  CHECK(obs0.size() == env.observation_dim());
  CHECK(is_feasible(env.system(), env.joints()));
  CHECK((env.achieved_goal() - tip_position(env.system(), env.joints())).norm() == 0.0);
  CHECK((env.desired_goal() - tip_position(env.system(), env.goal_joints())).norm() == 0.0);

  SUBCASE("zero actions keep the state and truncate at the budget") {
    const auto q0 = env.joints();
    StepResult r;
    for (int t = 0; t < 5; ++t) {
      r = env.step(ActionVector::zero());
      CHECK(r.info.q.beta == q0.beta);
      CHECK(r.info.q.alpha == q0.alpha);
      CHECK(r.reward == -1.0);
      CHECK(r.terminal == (t == 4));
    }
    CHECK(r.info.truncated);
    CHECK(!r.info.success);
    CHECK_THROWS_AS(env.step(ActionVector::zero()), EpisodeFinished);
  }
  SUBCASE("observation tracks the goal delta") {
    ActionVector a;
    a.values << -1, 0, 0, 0.05, -0.05, 0;
    const auto r = env.step(a);
    CHECK(r.observation.segment<3>(kGoalDeltaOffset).isApprox(r.info.achieved_goal - r.info.desired_goal));
    CHECK(r.info.error == doctest::Approx((r.info.achieved_goal - r.info.desired_goal).norm()));
  }
  SUBCASE("reaching the goal terminates with reward 0") {
    env.set_fixed_tolerance(50.0);
    env.set_desired_goal(env.achieved_goal());
    const auto r = env.step(ActionVector::zero());
    CHECK(r.reward == 0.0);
    CHECK(r.info.success);
    CHECK(r.terminal);
    CHECK(!r.info.truncated);
  }
  SUBCASE("set_joints validates") {
    JointConfig bad;
    bad.beta = {0, -1, 0};
    CHECK_THROWS_AS(env.set_joints(bad), InvalidJoints);
  }
}

TEST_CASE("seeding and goal_equals_start") {
  auto cfg = single(0);
  CtrEnv a(cfg), b(cfg);
  for (int k = 0; k < 5; ++k) CHECK(a.reset() == b.reset());
  cfg.goal_equals_start = true;
  CtrEnv c(cfg);
  c.reset();
  CHECK(c.error() == 0.0);
}

TEST_CASE("domain randomization draws a new system per episode") {
  auto cfg = single(2);
  cfg.randomization = DomainRandomizationSpec{0.05, {TubeField::Precurvature}};
  CtrEnv env(cfg);
  env.reset();
  const double k1 = env.system().tubes[0].precurvature;
  env.reset();
  CHECK(env.system().tubes[0].precurvature != k1);
  CHECK(std::abs(env.system().tubes[0].precurvature / 1.68 - 1.0) <= 0.05 + 1e-12);
  CHECK(env.system().tubes[0].length_total == 309);
}

TEST_CASE("config json") {
  const nlohmann::json j = {
      {"systems", {to_json(reference_system(1)), to_json(reference_system(3))}},
      {"env",
       {{"rotation_mode", "constrained"},
        {"sampler", "length_proportional"},
        {"curriculum", {{"kind", "linear"}, {"initial", 10}, {"final", 2}, {"steps", 100}}},
        {"noise", nlohmann::json::object()},
        {"max_episode_steps", 40}}},
      {"seed", 9}};
  const auto cfg = env_config_from_json(j, ".");
  CHECK(cfg.systems.size() == 2);
  CHECK(cfg.rotation_mode == RotationMode::Constrained);
  CHECK(cfg.curriculum.kind == CurriculumKind::Linear);
  CHECK(cfg.noise->tracking_std_mm == 0.8);
  CHECK(cfg.max_episode_steps == 40);
  CHECK(cfg.seed == 9);
  const auto again = env_config_from_json(to_json(cfg), ".");
  CHECK(to_json(again) == to_json(cfg));

  CHECK_THROWS_AS(env_config_from_json({{"systems", nlohmann::json::array()}}, "."), ConfigError);
  CHECK_THROWS_AS(env_config_from_json({{"systems", {"missing_file.json"}}}, "."), ConfigError);
  nlohmann::json bad = j;
  bad["env"]["rotation_mode"] = "sideways";
  CHECK_THROWS_AS(env_config_from_json(bad, "."), ConfigError);
}

TEST_CASE("episode log") {
  std::ostringstream out;
  write_episode_log_header(out);
  CtrEnv env(single());
  env.reset();
  write_episode_log_row(out, 0, env.step(ActionVector::zero()));
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  const auto commas = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  CHECK(commas(header) == commas(row));
}
