#include "ctr/rl/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "ctr/config.hpp"
#include "ctr/errors.hpp"

namespace ctr::rl {

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + s + "' (expected identity|relu|tanh)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

// ---------------------------------------------------------------- Normalizer

Normalizer::Normalizer(int dim, double eps, double clip)
    : eps_(eps), clip_(clip), sum_(Eigen::VectorXd::Zero(dim)), sumsq_(Eigen::VectorXd::Zero(dim)) {
  refresh();
}

void Normalizer::update(const Eigen::VectorXd& x) {
  if (x.size() != sum_.size()) throw DimensionMismatch("normalizer dimension mismatch");
  sum_ += x;
  sumsq_ += x.cwiseProduct(x);
  count_ += 1.0;
  refresh();
}

Eigen::VectorXd Normalizer::mean() const {
  if (count_ == 0.0) return Eigen::VectorXd::Zero(sum_.size());
  return sum_ / count_;
}

Eigen::VectorXd Normalizer::stddev() const {
  if (count_ == 0.0) return Eigen::VectorXd::Ones(sum_.size());
  const Eigen::VectorXd m = mean();
  const Eigen::VectorXd var = (sumsq_ / count_ - m.cwiseProduct(m)).cwiseMax(0.0);
  return var.cwiseSqrt().cwiseMax(eps_);
}

void Normalizer::refresh() {
  mean_f_ = mean().cast<float>();
  inv_std_f_ = stddev().cwiseInverse().cast<float>();
}

Eigen::MatrixXf Normalizer::normalize(const Eigen::MatrixXf& x) const {
  if (x.rows() != dim()) {
    throw DimensionMismatch("state dimension " + std::to_string(x.rows()) + " does not match " +
                            std::to_string(dim()));
  }
  const float c = static_cast<float>(clip_);
  Eigen::MatrixXf out = (x.colwise() - mean_f_).array().colwise() * inv_std_f_.array();
  return out.cwiseMax(-c).cwiseMin(c);
}

nlohmann::json Normalizer::to_json() const {
  return {{"eps", eps_},
          {"clip", clip_},
          {"count", count_},
          {"sum", std::vector<double>(sum_.data(), sum_.data() + sum_.size())},
          {"sumsq", std::vector<double>(sumsq_.data(), sumsq_.data() + sumsq_.size())}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  const auto sum = config::get<std::vector<double>>(j, "sum", "/normalizer");
  const auto sumsq = config::get<std::vector<double>>(j, "sumsq", "/normalizer");
  if (sum.size() != sumsq.size()) throw IncompatibleCheckpoint("normalizer statistics have mismatched sizes");
  Normalizer n(static_cast<int>(sum.size()), config::get<double>(j, "eps", "/normalizer"),
               config::get<double>(j, "clip", "/normalizer"));
  n.count_ = config::get<double>(j, "count", "/normalizer");
  n.sum_ = Eigen::Map<const Eigen::VectorXd>(sum.data(), static_cast<Eigen::Index>(sum.size()));
  n.sumsq_ = Eigen::Map<const Eigen::VectorXd>(sumsq.data(), static_cast<Eigen::Index>(sumsq.size()));
  n.refresh();
  return n;
}

// -------------------------------------------------------------- TrainConfig

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  const std::string w = "/train";
  c.total_timesteps = config::get_or<long long>(j, "total_timesteps", w, c.total_timesteps);
  c.curriculum_fraction = config::get_or<double>(j, "curriculum_fraction", w, c.curriculum_fraction);
  c.hidden = config::get_or<std::vector<int>>(j, "hidden", w, c.hidden);
  c.hidden_activation =
      activation_from_string(config::get_or<std::string>(j, "hidden_activation", w, to_string(c.hidden_activation)));
  c.batch_size = config::get_or<int>(j, "batch_size", w, c.batch_size);
  c.actor_lr = config::get_or<double>(j, "actor_lr", w, c.actor_lr);
  c.critic_lr = config::get_or<double>(j, "critic_lr", w, c.critic_lr);
  c.gamma = config::get_or<double>(j, "gamma", w, c.gamma);
  c.tau = config::get_or<double>(j, "tau", w, c.tau);
  c.action_l2 = config::get_or<double>(j, "action_l2", w, c.action_l2);
  c.her_k = config::get_or<int>(j, "her_k", w, c.her_k);
  c.buffer_capacity = config::get_or<std::size_t>(j, "buffer_capacity", w, c.buffer_capacity);
  c.updates_per_step = config::get_or<double>(j, "updates_per_step", w, c.updates_per_step);
  c.warmup_steps = config::get_or<long long>(j, "warmup_steps", w, c.warmup_steps);
  if (j.contains("exploration")) {
    const auto& e = j.at("exploration");
    const std::string ew = w + "/exploration";
    c.exploration.rotation_std =
        deg2rad(config::get_or<double>(e, "rotation_std_deg", ew, rad2deg(c.exploration.rotation_std)));
    c.exploration.extension_std = config::get_or<double>(e, "extension_std_mm", ew, c.exploration.extension_std);
    c.exploration.random_action_prob =
        config::get_or<double>(e, "random_action_prob", ew, c.exploration.random_action_prob);
  }
  c.log_interval = config::get_or<long long>(j, "log_interval", w, c.log_interval);
  c.eval_interval = config::get_or<long long>(j, "eval_interval", w, c.eval_interval);
  c.eval_episodes = config::get_or<int>(j, "eval_episodes", w, c.eval_episodes);
  c.seed = config::get_or<std::uint64_t>(j, "seed", w, c.seed);

  if (c.total_timesteps <= 0) throw ConfigError(w + "/total_timesteps: must be positive");
  if (c.batch_size <= 0) throw ConfigError(w + "/batch_size: must be positive");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw ConfigError(w + "/gamma: must lie in (0, 1)");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw ConfigError(w + "/tau: must lie in (0, 1]");
  if (c.her_k < 0) throw ConfigError(w + "/her_k: must be non-negative");
  if (c.hidden.empty()) throw ConfigError(w + "/hidden: need at least one hidden layer");
  if (c.log_interval <= 0) throw ConfigError(w + "/log_interval: must be positive");
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"total_timesteps", c.total_timesteps},
          {"curriculum_fraction", c.curriculum_fraction},
          {"hidden", c.hidden},
          {"hidden_activation", to_string(c.hidden_activation)},
          {"batch_size", c.batch_size},
          {"actor_lr", c.actor_lr},
          {"critic_lr", c.critic_lr},
          {"gamma", c.gamma},
          {"tau", c.tau},
          {"action_l2", c.action_l2},
          {"her_k", c.her_k},
          {"buffer_capacity", c.buffer_capacity},
          {"updates_per_step", c.updates_per_step},
          {"warmup_steps", c.warmup_steps},
          {"exploration",
           {{"rotation_std_deg", rad2deg(c.exploration.rotation_std)},
            {"extension_std_mm", c.exploration.extension_std},
            {"random_action_prob", c.exploration.random_action_prob}}},
          {"log_interval", c.log_interval},
          {"eval_interval", c.eval_interval},
          {"eval_episodes", c.eval_episodes},
          {"seed", c.seed}};
}

// --------------------------------------------------------------- Checkpoint

namespace {

nlohmann::json net_to_json(const Net& n) {
  const auto& p = n.params();
  return {{"sizes", n.sizes()},
          {"hidden_activation", to_string(n.hidden_activation())},
          {"output_activation", to_string(n.output_activation())},
          {"params", std::vector<float>(p.data(), p.data() + p.size())}};
}

Net net_from_json(const nlohmann::json& j, const std::string& where) {
  Net n(config::get<std::vector<int>>(j, "sizes", where),
        activation_from_string(config::get<std::string>(j, "hidden_activation", where)),
        activation_from_string(config::get<std::string>(j, "output_activation", where)));
  const auto p = config::get<std::vector<float>>(j, "params", where);
  if (static_cast<Eigen::Index>(p.size()) != n.num_params()) {
    throw IncompatibleCheckpoint(where + ": expected " + std::to_string(n.num_params()) + " parameters, found " +
                                 std::to_string(p.size()));
  }
  n.params() = Eigen::Map<const Eigen::VectorXf>(p.data(), n.num_params());
  return n;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  nlohmann::json j{{"format", "ctr-checkpoint"},
                   {"version", Checkpoint::kVersion},
                   {"obs_dim", ck.obs_dim},
                   {"actor", net_to_json(ck.actor)},
                   {"critic", net_to_json(ck.critic)},
                   {"normalizer", ck.normalizer.to_json()},
                   {"env_config", ck.env_config},
                   {"train_config", ck.train_config},
                   {"config_hash", ck.config_hash},
                   {"rng_state", ck.rng_state},
                   {"timesteps", ck.timesteps}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write checkpoint: " + path.string());
    out << j.dump();
    if (!out) throw ConfigError("failed writing checkpoint: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto j = config::load_json(path);
  if (j.value("format", "") != "ctr-checkpoint") throw IncompatibleCheckpoint(path.string() + ": not a checkpoint");
  const int version = j.value("version", -1);
  if (version != Checkpoint::kVersion) {
    throw IncompatibleCheckpoint(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.obs_dim = config::get<int>(j, "obs_dim", "");
  ck.actor = net_from_json(config::require(j, "actor", ""), "/actor");
  ck.critic = net_from_json(config::require(j, "critic", ""), "/critic");
  ck.normalizer = Normalizer::from_json(config::require(j, "normalizer", ""));
  ck.env_config = j.value("env_config", nlohmann::json::object());
  ck.train_config = j.value("train_config", nlohmann::json::object());
  ck.config_hash = j.value("config_hash", "");
  ck.rng_state = j.value("rng_state", "");
  ck.timesteps = j.value("timesteps", 0LL);
  if (ck.actor.input_dim() != ck.obs_dim || ck.normalizer.dim() != ck.obs_dim ||
      ck.critic.input_dim() != ck.obs_dim + kActionDim || ck.actor.output_dim() != kActionDim ||
      ck.critic.output_dim() != 1) {
    throw IncompatibleCheckpoint(path.string() + ": network shapes disagree with obs_dim " +
                                 std::to_string(ck.obs_dim));
  }
  return ck;
}

// ------------------------------------------------------------------- Acting

Eigen::Matrix<double, 6, 1> act_normalized(const Net& actor, const Normalizer& norm, const Eigen::VectorXd& state,
                                           bool deterministic, const ExplorationNoise& noise, Rng& rng) {
  if (state.size() != actor.input_dim()) {
    throw DimensionMismatch("state has " + std::to_string(state.size()) + " values, policy expects " +
                            std::to_string(actor.input_dim()));
  }
  const Eigen::MatrixXf x = norm.normalize(state.cast<float>());
  Eigen::Matrix<double, 6, 1> a = actor.forward(x).col(0).cast<double>();
  if (!deterministic) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (noise.random_action_prob > 0.0 && u01(rng) < noise.random_action_prob) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (int k = 0; k < 6; ++k) a[k] = u(rng);
    } else {
      std::normal_distribution<double> n01(0.0, 1.0);
      const double ext = noise.extension_std / kMaxExtensionStep;
      const double rot = noise.rotation_std / kMaxRotationStep;
      for (int k = 0; k < 6; ++k) {
        const double s = k < 3 ? ext : rot;
        if (s > 0.0) a[k] += s * n01(rng);
      }
    }
  }
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

ActionVector act(const Checkpoint& ck, const Eigen::VectorXd& state, bool deterministic,
                 const ExplorationNoise& noise, Rng& rng) {
  return ActionVector::from_normalized(act_normalized(ck.actor, ck.normalizer, state, deterministic, noise, rng));
}

ActionVector act(const Checkpoint& ck, const Eigen::VectorXd& state) {
  Rng unused(0);
  return act(ck, state, true, ExplorationNoise::none(), unused);
}

void write_train_log_csv(const std::vector<TrainLogRow>& rows, std::ostream& out) {
  out << "timestep,episodes,mean_episode_reward,success_rate,tolerance,critic_loss,actor_loss,eval_success_rate\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.timestep << "," << r.episodes << "," << r.mean_episode_reward << "," << r.success_rate << ","
        << r.tolerance << "," << r.critic_loss << "," << r.actor_loss << "," << r.eval_success_rate << "\n";
  }
}

// ------------------------------------------------------------------ Learner

namespace {
std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}
}  // namespace

DdpgLearner::DdpgLearner(int obs_dim, const TrainConfig& cfg, Rng& rng)
    : cfg_(cfg),
      actor_(layer_sizes(obs_dim, cfg.hidden, kActionDim), cfg.hidden_activation, Activation::Tanh),
      critic_(layer_sizes(obs_dim + kActionDim, cfg.hidden, 1), cfg.hidden_activation, Activation::Identity) {
  actor_.init(rng);
  critic_.init(rng);
  sync_targets();
  actor_opt_ = Adam<float>(actor_.num_params(), cfg.actor_lr);
  critic_opt_ = Adam<float>(critic_.num_params(), cfg.critic_lr);
}

void DdpgLearner::sync_targets() {
  actor_target_ = actor_;
  critic_target_ = critic_;
}

UpdateStats DdpgLearner::update(const Batch& b) {
  UpdateStats stats;
  const auto y = critic_targets(critic_target_, actor_target_, b, cfg_.gamma);
  Eigen::VectorXf grad;
  stats.critic_loss = critic_loss(critic_, b, y, &grad);
  critic_opt_.step(critic_.params(), grad);
  stats.actor_loss = actor_loss(actor_, critic_, b, cfg_.action_l2, &grad);
  actor_opt_.step(actor_.params(), grad);
  soft_update(critic_target_, critic_, cfg_.tau);
  soft_update(actor_target_, actor_, cfg_.tau);
  return stats;
}

// ----------------------------------------------------------------- Training

namespace {

double evaluate_success(const Net& actor, const Normalizer& norm, const EnvConfig& env_cfg, int episodes,
                        std::uint64_t seed) {
  CtrEnv env(env_cfg);
  env.seed(seed);
  env.set_fixed_tolerance(env_cfg.curriculum.final);
  Rng unused(0);
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    Eigen::VectorXd obs = env.reset();
    while (!env.done()) {
      const auto a = act_normalized(actor, norm, obs, true, ExplorationNoise::none(), unused);
      const auto r = env.step(ActionVector::from_normalized(a));
      obs = r.observation;
      if (r.info.success) {
        ++successes;
        break;
      }
    }
  }
  return episodes > 0 ? static_cast<double>(successes) / episodes : 0.0;
}

void guard_finite(const Net& n, const char* which, long long t, const UpdateStats& s) {
  if (!n.params().allFinite()) {
    std::ostringstream os;
    os << which << " parameters became non-finite at timestep " << t << " (critic loss " << s.critic_loss
       << ", actor loss " << s.actor_loss << ")";
    throw TrainingDiverged(os.str());
  }
}

}  // namespace

TrainResult train(const EnvFactory& make_env, const TrainConfig& cfg,
                  const std::function<void(const TrainLogRow&)>& on_log) {
  EnvConfig env_cfg = make_env().config();
  if (cfg.curriculum_fraction > 0.0) env_cfg.curriculum.steps = static_cast<double>(cfg.curriculum_steps());
  CtrEnv env(env_cfg);
  env.seed(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const int obs_dim = env.observation_dim();

  Rng rng(cfg.seed);
  DdpgLearner learner(obs_dim, cfg, rng);
  Normalizer norm(obs_dim);
  ReplayBuffer buffer(cfg.buffer_capacity, obs_dim);

  TrainResult result;
  std::vector<Transition> episode;
  episode.reserve(static_cast<std::size_t>(env_cfg.max_episode_steps));

  double window_reward = 0.0, window_success = 0.0, window_critic = 0.0, window_actor = 0.0;
  long long window_episodes = 0, window_updates = 0, episodes = 0;
  double episode_reward = 0.0, update_credit = 0.0;
  UpdateStats last;

  env.set_training_step(0.0);
  Eigen::VectorXd obs = env.reset();
  for (long long t = 0; t < cfg.total_timesteps; ++t) {
    env.set_training_step(static_cast<double>(t));
    Eigen::Matrix<double, 6, 1> a;
    if (t < cfg.warmup_steps) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (int k = 0; k < 6; ++k) a[k] = u(rng);
    } else {
      a = act_normalized(learner.actor(), norm, obs, false, cfg.exploration, rng);
    }
    const StepResult r = env.step(ActionVector::from_normalized(a));
    Transition tr;
    tr.state = obs;
    tr.action = a;
    tr.reward = r.reward;
    tr.next_state = r.observation;
    tr.achieved_goal = r.info.achieved_goal;
    tr.desired_goal = r.info.desired_goal;
    tr.tolerance = r.info.tolerance;
    tr.terminal = r.info.success;
    episode.push_back(std::move(tr));
    episode_reward += r.reward;
    obs = r.observation;

    if (env.done()) {
      const auto stored = her_relabel(episode, cfg.her_k, rng);
      for (const auto& s : stored) norm.update(s.state);
      norm.update(stored.back().next_state);
      buffer.add_all(stored);

      ++episodes;
      ++window_episodes;
      window_reward += episode_reward;
      window_success += r.info.success ? 1.0 : 0.0;

      if (t + 1 >= cfg.warmup_steps && buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
        update_credit += cfg.updates_per_step * static_cast<double>(episode.size());
        while (update_credit >= 1.0) {
          update_credit -= 1.0;
          Batch b = buffer.sample(static_cast<std::size_t>(cfg.batch_size), rng);
          b.states = norm.normalize(b.states);
          b.next_states = norm.normalize(b.next_states);
          last = learner.update(b);
          if (!std::isfinite(last.critic_loss) || !std::isfinite(last.actor_loss)) {
            std::ostringstream os;
            os << "non-finite loss at timestep " << t << " (critic " << last.critic_loss << ", actor "
               << last.actor_loss << ")";
            throw TrainingDiverged(os.str());
          }
          window_critic += last.critic_loss;
          window_actor += last.actor_loss;
          ++window_updates;
        }
        guard_finite(learner.actor(), "actor", t, last);
        guard_finite(learner.critic(), "critic", t, last);
      }
      episode.clear();
      episode_reward = 0.0;
      obs = env.reset();
    }

    const long long done_steps = t + 1;
    if (done_steps % cfg.log_interval == 0 || done_steps == cfg.total_timesteps) {
      TrainLogRow row;
      row.timestep = done_steps;
      row.episodes = episodes;
      row.mean_episode_reward = window_episodes ? window_reward / window_episodes : 0.0;
      row.success_rate = window_episodes ? window_success / window_episodes : 0.0;
      row.tolerance = env.tolerance();
      row.critic_loss = window_updates ? window_critic / window_updates : 0.0;
      row.actor_loss = window_updates ? window_actor / window_updates : 0.0;
      if (cfg.eval_interval > 0 && (done_steps % cfg.eval_interval == 0 || done_steps == cfg.total_timesteps)) {
        row.eval_success_rate = evaluate_success(learner.actor(), norm, env_cfg, cfg.eval_episodes,
                                                 cfg.seed + 7919u * static_cast<std::uint64_t>(done_steps));
      }
      result.log.push_back(row);
      if (on_log) on_log(row);
      window_reward = window_success = window_critic = window_actor = 0.0;
      window_episodes = window_updates = 0;
    }
  }

  Checkpoint& ck = result.checkpoint;
  ck.obs_dim = obs_dim;
  ck.actor = learner.actor();
  ck.critic = learner.critic();
  ck.normalizer = norm;
  ck.env_config = to_json(env_cfg);
  ck.train_config = to_json(cfg);
  ck.config_hash = config::hex64(config::hash_json({{"env", ck.env_config}, {"train", ck.train_config}}));
  ck.rng_state = rng_to_string(rng);
  ck.timesteps = cfg.total_timesteps;
  return result;
}

}  // namespace ctr::rl
