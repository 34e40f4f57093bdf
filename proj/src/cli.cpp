#include "ctr/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "ctr/config.hpp"
#include "ctr/control.hpp"
#include "ctr/env.hpp"
#include "ctr/errors.hpp"
#include "ctr/eval.hpp"
#include "ctr/kinematics.hpp"
#include "ctr/plot.hpp"
#include "ctr/rl/ddpg.hpp"
#include "ctr/systems.hpp"

namespace ctr::cli {

nlohmann::json RunManifest::to_json() const {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& p : outputs) outs.push_back(p.string());
  return {{"command", command},       {"config_hash", config_hash}, {"seed", seed},
          {"artifact_version", artifact_version}, {"started_at", started_at}, {"finished_at", finished_at},
          {"arguments", arguments},   {"outputs", outs}};
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& out) {
  if (out.is_absolute()) return out;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return std::filesystem::path(root) / out;
  return out;
}

namespace {

const CLI::Validator file_found(
    [](std::string& path) -> std::string {
      return std::filesystem::is_regular_file(path) ? std::string() : "file not found: " + path;
    },
    "FILE");

namespace fs = std::filesystem;

// Shared state of one invocation.
struct Context {
  std::ostream& out;
  std::ostream& err;
  RunManifest manifest;
  fs::path out_dir;

  std::string tag() const {
    return "# manifest=" + (out_dir / "manifest.json").string() + " config_hash=" + manifest.config_hash + "\n";
  }

  std::ofstream open(const fs::path& name) {
    fs::create_directories(out_dir);
    const fs::path p = out_dir / name;
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot write " + p.string());
    manifest.outputs.push_back(p);
    return f;
  }

  void finish() {
    if (out_dir.empty()) return;
    manifest.finished_at = utc_now();
    fs::create_directories(out_dir);
    std::ofstream f(out_dir / "manifest.json");
    f << manifest.to_json().dump(2) << "\n";
  }
};

struct Experiment {
  nlohmann::json raw;
  EnvConfig env;
  nlohmann::json train;
  nlohmann::json eval;
};

Experiment load_experiment(const fs::path& path) {
  Experiment e;
  e.raw = config::load_json(path);
  e.env = env_config_from_json(e.raw, path.parent_path());
  e.train = e.raw.value("train", nlohmann::json::object());
  e.eval = e.raw.value("eval", nlohmann::json::object());
  return e;
}

EnvConfig env_from_checkpoint(const rl::Checkpoint& ck) { return env_config_from_json(ck.env_config, "."); }

void apply_noise_flag(EnvConfig& cfg, bool noise) {
  if (noise) cfg.noise = NoiseSpec::defaults();
}

void print_report(std::ostream& out, const eval::IkEvalReport& r, const EnvConfig& env) {
  out << std::setprecision(6);
  out << "episodes=" << r.episodes.size() << " step_budget=" << r.step_budget << " mean_error=" << r.mean_error()
      << " std_error=" << r.std_error() << " success_rate=" << r.success_rate() << "\n";
  for (std::size_t i = 0; i < env.systems.size() && env.systems.size() > 1; ++i) {
    const auto sub = r.for_system(static_cast<int>(i));
    out << "system[" << i << "] id=" << env.systems[i].system_id << " episodes=" << sub.episodes.size()
        << " mean_error=" << sub.mean_error() << " success_rate=" << sub.success_rate() << "\n";
  }
  if (r.episodes.size() >= 2) {
    try {
      const auto fit = eval::error_regression(r);
      out << "regression slope=" << fit.slope << " intercept=" << fit.intercept << "\n";
    } catch (const DegenerateFit& e) {
      out << "regression unavailable: " << e.what() << "\n";
    }
  }
  if (env.systems.size() == 1 && !r.episodes.empty()) {
    out << "percent_of_length=" << eval::percent_of_length(r.mean_error(), env.systems.front()) << "\n";
  }
}

void write_frames(Context& ctx, const CtrSystem& sys, const control::TrackingResult& r, KinematicsTier tier,
                  const std::string& prefix) {
  for (std::size_t i = 0; i < r.waypoints.size(); ++i) {
    std::ostringstream name;
    name << prefix << "_frames/frame_" << std::setw(4) << std::setfill('0') << i << ".csv";
    fs::create_directories(ctx.out_dir / (prefix + "_frames"));
    auto f = ctx.open(name.str());
    f << ctx.tag();
    write_backbone_csv(forward_kinematics(sys, r.waypoints[i].q, tier), f);
  }
}

void print_tracking(std::ostream& out, const std::string& label, const control::TrackingResult& r) {
  out << std::setprecision(6) << label << " waypoints=" << r.waypoints.size() << " mean_error=" << r.mean_error()
      << " std_error=" << r.std_error() << " steps=" << r.total_steps() << " saturations=" << r.total_saturations()
      << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Concentric tube robot kinematics and reinforcement-learning workbench", "ctr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kArtifactVersion);

  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir;

  // train
  auto* train = app.add_subcommand("train", "Train a goal-conditioned DDPG+HER policy");
  std::string train_config;
  long long timesteps = 0;
  bool quiet = false;
  train->add_option("--config", train_config, "Experiment JSON")->required()->check(file_found);
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--seed", seed, "Random seed (overrides config)");
  train->add_option("--timesteps", timesteps, "Total training timesteps (overrides config)");
  train->add_flag("--quiet", quiet, "Suppress progress lines");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Run an inverse-kinematics evaluation battery");
  std::string checkpoint_path, config_path, agent_kind = "policy";
  int episodes = eval::kDefaultEpisodes, workers = 1, steps = 0;
  std::optional<int> system_index;
  bool noise = false;
  evaluate->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON");
  evaluate->add_option("--config", config_path, "Experiment JSON (defaults to the checkpoint's environment)");
  evaluate->add_option("--agent", agent_kind, "policy|random|oracle")
      ->check(CLI::IsMember({"policy", "random", "oracle"}));
  evaluate->add_option("--episodes", episodes, "Number of episodes")->check(CLI::NonNegativeNumber);
  evaluate->add_option("--seed", seed, "Random seed");
  evaluate->add_option("--workers", workers, "Parallel workers")->check(CLI::PositiveNumber);
  evaluate->add_option("--steps", steps, "Step budget per episode (default: training horizon)");
  evaluate->add_option("--system", system_index, "Pin one registry entry");
  evaluate->add_flag("--noise", noise, "Add default encoder and tracking noise");
  evaluate->add_option("--out", out_dir, "Output directory")->required();

  // export-workspace
  auto* exportw = app.add_subcommand("export-workspace", "Export workspace and polar error data from a report");
  std::string report_path, prefix = "eval";
  exportw->add_option("--report", report_path, "Report CSV from evaluate")->required()->check(file_found);
  exportw->add_option("--prefix", prefix, "File prefix");
  exportw->add_option("--out", out_dir, "Output directory")->required();

  // follow and compare-jacobian share path options
  std::string path_spec, system_file, controller = "policy";
  double kp = 2.0, lambda = 0.45, dt = 0.1;
  int iterations = 50;
  std::vector<double> q0;
  bool frames = false;
  int path_system = 0;
  auto add_path_options = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON");
    sub->add_option("--path", path_spec, "Path spec JSON")->required()->check(file_found);
    sub->add_option("--system", path_system, "Registry index within the checkpoint's environment");
    sub->add_option("--system-file", system_file, "System JSON (Jacobian controller without checkpoint)");
    sub->add_option("--kp", kp, "Proportional gain (diagonal)");
    sub->add_option("--lambda", lambda, "Damping factor");
    sub->add_option("--dt", dt, "Jacobian integration step");
    sub->add_option("--iterations", iterations, "Jacobian iterations per waypoint");
    sub->add_option("--q0", q0, "Start joints: beta1 beta2 beta3 (mm) alpha1 alpha2 alpha3 (deg)")->expected(6);
    sub->add_flag("--noise", noise, "Add default encoder and tracking noise to the policy's observations");
    sub->add_option("--out", out_dir, "Output directory")->required();
  };
  auto* follow = app.add_subcommand("follow", "Follow a path with the policy or the Jacobian controller");
  add_path_options(follow);
  follow->add_option("--controller", controller, "policy|jacobian")->check(CLI::IsMember({"policy", "jacobian"}));
  follow->add_flag("--frames", frames, "Write a backbone CSV per waypoint");
  auto* compare = app.add_subcommand("compare-jacobian", "Run policy and Jacobian controllers on one path");
  add_path_options(compare);

  // plot
  auto* plotc = app.add_subcommand("plot", "Render CSV data to SVG");
  std::string input, kind = "scatter", xcol, ycol, ccol, title, output;
  plotc->add_option("--input", input, "CSV file")->required()->check(file_found);
  plotc->add_option("--kind", kind, "scatter|line|polar")->check(CLI::IsMember({"scatter", "line", "polar"}));
  plotc->add_option("--x", xcol, "X column (polar: angle in degrees)")->required();
  plotc->add_option("--y", ycol, "Y column (polar: radius)")->required();
  plotc->add_option("--color", ccol, "Colour column");
  plotc->add_option("--title", title, "Title");
  plotc->add_option("--output", output, "SVG file")->required();

  // trace
  auto* trace = app.add_subcommand("trace", "Print a full-precision environment trace for a scripted episode");
  std::string actions_file;
  int trace_steps = 50;
  trace->add_option("--config", config_path, "Experiment or environment JSON")->required()->check(file_found);
  trace->add_option("--seed", seed, "Environment seed");
  trace->add_option("--steps", trace_steps, "Scripted steps when no action file is given");
  trace->add_option("--actions", actions_file, "CSV of normalized actions, 6 per row")->check(file_found);

  // validate
  auto* validate = app.add_subcommand("validate", "Check system or experiment files");
  std::vector<std::string> files;
  validate->add_option("files", files, "System or experiment JSON files")->required()->check(file_found);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  for (auto* sub : app.get_subcommands()) {
    if (const auto* opt = sub->get_option_no_throw("--seed"); opt && opt->count() > 0) seed_given = true;
  }

  Context ctx{out, err, {}, {}};
  ctx.manifest.started_at = utc_now();
  for (int i = 0; i < argc; ++i) ctx.manifest.arguments.emplace_back(argv[i]);
  if (!out_dir.empty()) ctx.out_dir = resolve_output_dir(out_dir);

  try {
    if (train->parsed()) {
      ctx.manifest.command = "train";
      Experiment ex = load_experiment(train_config);
      rl::TrainConfig tc = rl::train_config_from_json(ex.train);
      if (!ex.train.contains("seed")) tc.seed = ex.env.seed;
      if (seed_given) tc.seed = seed;
      if (timesteps > 0) tc.total_timesteps = timesteps;
      ex.env.seed = tc.seed;
      out << "observation dim: " << ex.env.observation_dim() << "\n";
      ctx.manifest.seed = tc.seed;
      ctx.manifest.config_hash =
          config::hex64(config::hash_json({{"env", to_json(ex.env)}, {"train", rl::to_json(tc)}}));
      const EnvConfig env_cfg = ex.env;
      auto result = rl::train([&] { return CtrEnv(env_cfg); }, tc, [&](const rl::TrainLogRow& r) {
        if (!quiet) {
          out << "t=" << r.timestep << " episodes=" << r.episodes << " success=" << r.success_rate
              << " tolerance=" << r.tolerance << " critic=" << r.critic_loss << " actor=" << r.actor_loss;
          if (r.eval_success_rate >= 0) out << " eval_success=" << r.eval_success_rate;
          out << std::endl;
        }
      });
      fs::create_directories(ctx.out_dir);
      rl::save_checkpoint(result.checkpoint, ctx.out_dir / "checkpoint.json");
      ctx.manifest.outputs.push_back(ctx.out_dir / "checkpoint.json");
      auto log = ctx.open("train_log.csv");
      log << ctx.tag();
      rl::write_train_log_csv(result.log, log);
    } else if (evaluate->parsed()) {
      ctx.manifest.command = "evaluate";
      ctx.manifest.seed = seed;
      std::shared_ptr<rl::Checkpoint> ck;
      if (!checkpoint_path.empty()) ck = std::make_shared<rl::Checkpoint>(rl::load_checkpoint(checkpoint_path));
      EnvConfig env_cfg;
      if (!config_path.empty()) {
        env_cfg = load_experiment(config_path).env;
      } else if (ck) {
        env_cfg = env_from_checkpoint(*ck);
      } else {
        throw ConfigError("evaluate needs --config or --checkpoint");
      }
      apply_noise_flag(env_cfg, noise);
      eval::AgentFactory agent;
      if (agent_kind == "policy") {
        if (!ck) throw ConfigError("--agent policy requires --checkpoint");
        if (ck->obs_dim != env_cfg.observation_dim()) {
          throw DimensionMismatch("checkpoint expects observation dimension " + std::to_string(ck->obs_dim) +
                                  ", environment produces " + std::to_string(env_cfg.observation_dim()));
        }
        agent = eval::policy_agent(ck);
      } else if (agent_kind == "random") {
        agent = eval::random_agent();
      } else {
        agent = eval::oracle_agent();
      }
      ctx.manifest.config_hash = ck ? ck->config_hash : config::hex64(config::hash_json(to_json(env_cfg)));
      eval::EvalOptions opts;
      opts.episodes = episodes;
      opts.seed = seed;
      opts.workers = workers;
      opts.step_budget = steps;
      opts.system_index = system_index;
      const auto report = eval::evaluate_ik(agent, env_cfg, opts);
      print_report(out, report, env_cfg);
      auto f = ctx.open("report.csv");
      f << ctx.tag();
      eval::write_report_csv(report, f);
    } else if (exportw->parsed()) {
      ctx.manifest.command = "export-workspace";
      std::ifstream in(report_path);
      const auto report = eval::read_report_csv(in);
      const auto ex = eval::export_workspace_errors(report, ctx.out_dir, prefix);
      ctx.manifest.outputs.insert(ctx.manifest.outputs.end(), {ex.all, ex.filtered, ex.polar[0], ex.polar[1], ex.polar[2]});
      out << "rows=" << ex.rows << " filtered_rows=" << ex.filtered_rows << "\n";
    } else if (follow->parsed() || compare->parsed()) {
      const bool comparing = compare->parsed();
      ctx.manifest.command = comparing ? "compare-jacobian" : "follow";
      const auto path_json = config::load_json(path_spec);
      const auto waypoints = control::generate_path(control::path_spec_from_json(path_json));
      std::shared_ptr<rl::Checkpoint> ck;
      if (!checkpoint_path.empty()) ck = std::make_shared<rl::Checkpoint>(rl::load_checkpoint(checkpoint_path));
      const bool need_policy = comparing || controller == "policy";
      if (need_policy && !ck) throw ConfigError("the policy controller requires --checkpoint");
      CtrSystem sys;
      EnvConfig env_cfg;
      if (ck) {
        env_cfg = env_from_checkpoint(*ck);
        if (path_system < 0 || path_system >= static_cast<int>(env_cfg.systems.size())) {
          throw IncompatibleCheckpoint("system index " + std::to_string(path_system) + " not in the checkpoint's " +
                                       std::to_string(env_cfg.systems.size()) + " systems");
        }
        sys = env_cfg.systems[static_cast<std::size_t>(path_system)];
        if (!system_file.empty() && load_system(system_file).tubes != sys.tubes) {
          throw IncompatibleCheckpoint("--system-file does not match the checkpoint's system " +
                                       std::to_string(path_system));
        }
        ctx.manifest.config_hash = ck->config_hash;
      } else {
        if (system_file.empty()) throw ConfigError("the Jacobian controller needs --system-file or --checkpoint");
        sys = load_system(system_file);
        ctx.manifest.config_hash = config::hex64(config::hash_json(to_json(sys)));
      }
      apply_noise_flag(env_cfg, noise);
      const JointConfig start = q0.empty() ? control::path_start_joints(sys, path_json, waypoints.front())
                                            : control::joints_from_flat(q0);
      if (need_policy) {
        control::PolicyControllerOptions po;
        po.system_index = path_system;
        const auto res = control::policy_controller(*ck, env_cfg, waypoints, start, po);
        print_tracking(out, "policy", res.result);
        auto f = ctx.open(comparing ? "policy_tracking.csv" : "tracking.csv");
        f << ctx.tag();
        control::write_tracking_csv(res.result, f);
        if (frames) write_frames(ctx, sys, res.result, env_cfg.tier, "policy");
      }
      if (comparing || controller == "jacobian") {
        control::JacobianGains g;
        g.kp = Eigen::Vector3d::Constant(kp);
        g.lambda = lambda;
        g.dt = dt;
        g.iterations_per_waypoint = iterations;
        if (ck) g.rotation_mode = env_cfg.rotation_mode;
        const auto res = control::jacobian_controller(sys, waypoints, start, g);
        print_tracking(out, "jacobian", res);
        auto f = ctx.open(comparing ? "jacobian_tracking.csv" : "tracking.csv");
        f << ctx.tag();
        control::write_tracking_csv(res, f);
        if (frames) write_frames(ctx, sys, res, g.tier, "jacobian");
      }
    } else if (plotc->parsed()) {
      std::ifstream in(input);
      const auto table = plot::read_csv(in);
      std::ofstream f(output);
      if (!f) throw ConfigError("cannot write " + output);
      if (kind == "polar") {
        plot::write_polar_svg(title, table.column(xcol), table.column(ycol), f);
      } else {
        plot::Figure fig;
        fig.title = title;
        fig.xlabel = xcol;
        fig.ylabel = ycol;
        plot::Series s;
        s.x = table.column(xcol);
        s.y = table.column(ycol);
        if (!ccol.empty()) s.color = table.column(ccol);
        s.line = kind == "line";
        fig.series.push_back(std::move(s));
        plot::write_svg(fig, f);
      }
    } else if (trace->parsed()) {
      EnvConfig env_cfg = load_experiment(config_path).env;
      if (seed_given) env_cfg.seed = seed;
      std::vector<Eigen::Matrix<double, 6, 1>> actions;
      if (!actions_file.empty()) {
        std::ifstream in(actions_file);
        std::string line;
        while (std::getline(in, line)) {
          if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
          std::istringstream ls(line);
          std::string cell;
          Eigen::Matrix<double, 6, 1> a;
          int k = 0;
          while (std::getline(ls, cell, ',') && k < 6) a[k++] = std::stod(cell);
          if (k != 6) throw ConfigError(actions_file + ": each action row needs 6 values");
          actions.push_back(a);
        }
      } else {
        for (int t = 0; t < trace_steps; ++t) {
          Eigen::Matrix<double, 6, 1> a;
          for (int k = 0; k < 6; ++k) a[k] = std::sin(0.37 * (t + 1) + 1.1 * k);
          actions.push_back(a);
        }
      }
      CtrEnv env(env_cfg);
      env.seed(env_cfg.seed);
      Eigen::VectorXd obs = env.reset();
      out << std::setprecision(17);
      out << "t,reward,terminal";
      for (Eigen::Index k = 0; k < obs.size(); ++k) out << ",obs" << k;
      out << "\n0,0,0";
      for (Eigen::Index k = 0; k < obs.size(); ++k) out << "," << obs[k];
      out << "\n";
      for (std::size_t t = 0; t < actions.size() && !env.done(); ++t) {
        const auto r = env.step(ActionVector::from_normalized(actions[t]));
        out << t + 1 << "," << r.reward << "," << (r.terminal ? 1 : 0);
        for (Eigen::Index k = 0; k < r.observation.size(); ++k) out << "," << r.observation[k];
        out << "\n";
      }
    } else if (validate->parsed()) {
      int bad = 0;
      for (const auto& file : files) {
        const auto j = config::load_json(file);
        if (j.contains("tubes")) {
          const auto violations = validate_system(system_from_json(j));
          if (violations.empty()) {
            out << file << ": ok\n";
          } else {
            ++bad;
            for (const auto& v : violations) err << file << ": " << v.field << ": " << v.message << "\n";
          }
        } else {
          const auto ex = load_experiment(file);
          rl::train_config_from_json(ex.train);
          out << file << ": ok (observation dim " << ex.env.observation_dim() << ")\n";
        }
      }
      if (bad > 0) return 1;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  ctx.finish();
  return 0;
}

}  // namespace ctr::cli
