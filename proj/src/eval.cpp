#include "ctr/eval.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "ctr/errors.hpp"

namespace ctr::eval {

namespace {

class PolicyAgent final : public Agent {
 public:
  explicit PolicyAgent(std::shared_ptr<const rl::Checkpoint> ck) : ck_(std::move(ck)) {}
  ActionVector act(CtrEnv& env) override { return rl::act(*ck_, env.observation()); }

 private:
  std::shared_ptr<const rl::Checkpoint> ck_;
};

class RandomAgent final : public Agent {
 public:
  explicit RandomAgent(std::uint64_t seed) : rng_(seed) {}
  ActionVector act(CtrEnv&) override {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Matrix<double, 6, 1> a;
    for (int k = 0; k < 6; ++k) a[k] = u(rng_);
    return ActionVector::from_normalized(a);
  }

 private:
  Rng rng_;
};

class OracleAgent final : public Agent {
 public:
  ActionVector act(CtrEnv& env) override {
    env.set_joints(env.goal_joints());
    return ActionVector::zero();
  }
};

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(episode), 0x6576616cu};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

EpisodeRecord run_episode(CtrEnv& env, Agent& agent, int episode, std::uint64_t seed, const EvalOptions& opts,
                          int budget) {
  env.seed(seed);
  env.reset();
  env.begin_segment(budget);
  EpisodeRecord rec;
  rec.episode = episode;
  rec.system_index = env.system_index();
  rec.start_q = env.joints();
  rec.start_tip = env.achieved_goal();
  rec.desired = env.desired_goal();
  rec.initial_distance = env.error();
  while (!env.done()) {
    const ActionVector a = agent.act(env);
    const StepResult r = env.step(a);
    ++rec.steps;
    if (r.info.error <= opts.tolerance) break;
  }
  rec.final_q = env.joints();
  rec.achieved = env.achieved_goal();
  rec.error = env.error();
  rec.success = rec.error < kSuccessThreshold;
  return rec;
}

double wrap_deg(double rad) {
  double d = std::remainder(rad, 2.0 * std::numbers::pi) * 180.0 / std::numbers::pi;
  if (d <= -180.0) d += 360.0;
  return d;
}

}  // namespace

AgentFactory policy_agent(std::shared_ptr<const rl::Checkpoint> ck) {
  return [ck](std::uint64_t) { return std::make_unique<PolicyAgent>(ck); };
}

AgentFactory random_agent() {
  return [](std::uint64_t seed) { return std::make_unique<RandomAgent>(seed ^ 0xa5a5a5a5a5a5a5a5ULL); };
}

AgentFactory oracle_agent() {
  return [](std::uint64_t) { return std::make_unique<OracleAgent>(); };
}

double IkEvalReport::mean_error() const {
  if (episodes.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (const auto& e : episodes) s += e.error;
  return s / static_cast<double>(episodes.size());
}

double IkEvalReport::std_error() const {
  if (episodes.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_error();
  double ss = 0.0;
  for (const auto& e : episodes) ss += (e.error - m) * (e.error - m);
  return std::sqrt(ss / static_cast<double>(episodes.size()));
}

double IkEvalReport::success_rate() const {
  if (episodes.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.success ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(episodes.size());
}

IkEvalReport IkEvalReport::for_system(int index) const {
  IkEvalReport out = *this;
  out.episodes.clear();
  for (const auto& e : episodes) {
    if (e.system_index == index) out.episodes.push_back(e);
  }
  return out;
}

IkEvalReport evaluate_ik(const AgentFactory& make_agent, const EnvConfig& env_cfg, const EvalOptions& opts) {
  if (opts.episodes < 0) throw InvalidSpec("episode count must be non-negative");
  IkEvalReport report;
  report.step_budget = opts.step_budget > 0 ? opts.step_budget : env_cfg.max_episode_steps;
  report.tolerance = opts.tolerance;
  report.seed = opts.seed;
  report.episodes.resize(static_cast<std::size_t>(opts.episodes));

  const int workers = std::max(1, std::min(opts.workers, opts.episodes));
  auto run_range = [&](int worker) {
    CtrEnv env(env_cfg);
    env.set_fixed_tolerance(opts.tolerance);
    env.pin_system(opts.system_index);
    for (int e = worker; e < opts.episodes; e += workers) {
      const std::uint64_t s = episode_seed(opts.seed, e);
      auto agent = make_agent(s);
      report.episodes[static_cast<std::size_t>(e)] = run_episode(env, *agent, e, s, opts, report.step_budget);
    }
  };
  if (workers == 1) {
    run_range(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          run_range(w);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return report;
}

IkEvalReport evaluate_ik(const rl::Checkpoint& ck, const EnvConfig& env_cfg, const EvalOptions& opts) {
  if (env_cfg.observation_dim() != ck.obs_dim) {
    throw DimensionMismatch("checkpoint expects observation dimension " + std::to_string(ck.obs_dim) +
                            ", environment produces " + std::to_string(env_cfg.observation_dim()));
  }
  return evaluate_ik(policy_agent(std::make_shared<const rl::Checkpoint>(ck)), env_cfg, opts);
}

void write_report_csv(const IkEvalReport& r, std::ostream& out) {
  const auto old = out.precision(17);
  out << "# step_budget=" << r.step_budget << " tolerance=" << r.tolerance << " seed=" << r.seed << "\n";
  out << "# mean_error=" << r.mean_error() << " std_error=" << r.std_error() << " success_rate=" << r.success_rate()
      << "\n";
  out << "episode,system,beta1_0,beta2_0,beta3_0,alpha1_0,alpha2_0,alpha3_0,"
         "beta1,beta2,beta3,alpha1,alpha2,alpha3,"
         "start_x,start_y,start_z,gd_x,gd_y,gd_z,ga_x,ga_y,ga_z,error,initial_distance,steps,success\n";
  for (const auto& e : r.episodes) {
    out << e.episode << "," << e.system_index;
    for (int k = 0; k < 3; ++k) out << "," << e.start_q.beta[k];
    for (int k = 0; k < 3; ++k) out << "," << e.start_q.alpha[k];
    for (int k = 0; k < 3; ++k) out << "," << e.final_q.beta[k];
    for (int k = 0; k < 3; ++k) out << "," << e.final_q.alpha[k];
    for (int k = 0; k < 3; ++k) out << "," << e.start_tip[k];
    for (int k = 0; k < 3; ++k) out << "," << e.desired[k];
    for (int k = 0; k < 3; ++k) out << "," << e.achieved[k];
    out << "," << e.error << "," << e.initial_distance << "," << e.steps << "," << (e.success ? 1 : 0) << "\n";
  }
  out.precision(old);
}

IkEvalReport read_report_csv(std::istream& in) {
  IkEvalReport r;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string tok;
      while (ls >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq);
        const auto val = tok.substr(eq + 1);
        if (key == "step_budget") r.step_budget = std::stoi(val);
        if (key == "tolerance") r.tolerance = std::stod(val);
        if (key == "seed") r.seed = std::stoull(val);
      }
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    std::vector<double> v;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 27) throw InvalidSpec("report row has " + std::to_string(v.size()) + " columns, expected 27");
    EpisodeRecord e;
    e.episode = static_cast<int>(v[0]);
    e.system_index = static_cast<int>(v[1]);
    for (int k = 0; k < 3; ++k) {
      e.start_q.beta[k] = v[2 + k];
      e.start_q.alpha[k] = v[5 + k];
      e.final_q.beta[k] = v[8 + k];
      e.final_q.alpha[k] = v[11 + k];
      e.start_tip[k] = v[14 + k];
      e.desired[k] = v[17 + k];
      e.achieved[k] = v[20 + k];
    }
    e.error = v[23];
    e.initial_distance = v[24];
    e.steps = static_cast<int>(v[25]);
    e.success = v[26] != 0.0;
    r.episodes.push_back(e);
  }
  return r;
}

ErrorRegression fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DegenerateFit("regression needs at least 2 paired samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 1e-12 * std::max(1.0, mx * mx) * n)) throw DegenerateFit("all initial distances are equal");
  ErrorRegression fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

ErrorRegression error_regression(const IkEvalReport& r) {
  std::vector<double> x, y;
  for (const auto& e : r.episodes) {
    x.push_back(e.initial_distance);
    y.push_back(e.error);
  }
  return fit_line(x, y);
}

WorkspaceExport export_workspace_errors(const IkEvalReport& r, const std::filesystem::path& dir,
                                        const std::string& prefix) {
  std::filesystem::create_directories(dir);
  WorkspaceExport ex;
  ex.all = dir / (prefix + "_workspace.csv");
  ex.filtered = dir / (prefix + "_workspace_gt2mm.csv");
  std::ofstream all(ex.all), filtered(ex.filtered);
  std::ofstream polar[3];
  for (int i = 0; i < 3; ++i) {
    ex.polar[i] = dir / (prefix + "_polar_tube" + std::to_string(i + 1) + ".csv");
    polar[i].open(ex.polar[i]);
    polar[i] << "alpha_deg,error\n";
    polar[i].precision(12);
  }
  if (!all || !filtered) throw InvalidSpec("cannot write workspace export under " + dir.string());
  all << "x,y,z,error\n";
  filtered << "x,y,z,error\n";
  all.precision(12);
  filtered.precision(12);
  for (const auto& e : r.episodes) {
    all << e.achieved.x() << "," << e.achieved.y() << "," << e.achieved.z() << "," << e.error << "\n";
    ++ex.rows;
    if (e.error > kLargeErrorThreshold) {
      filtered << e.achieved.x() << "," << e.achieved.y() << "," << e.achieved.z() << "," << e.error << "\n";
      ++ex.filtered_rows;
    }
    for (int i = 0; i < 3; ++i) polar[i] << wrap_deg(e.final_q.alpha[i]) << "," << e.error << "\n";
  }
  return ex;
}

double percent_of_length(double error_mm, const CtrSystem& sys) { return 100.0 * error_mm / sys.length(); }

}  // namespace ctr::eval
