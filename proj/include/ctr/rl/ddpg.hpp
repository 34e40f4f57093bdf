#pragma once

// Goal-conditioned DDPG with hindsight relabeling.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "ctr/env.hpp"
#include "ctr/rl/mlp.hpp"
#include "ctr/rl/replay_buffer.hpp"

namespace ctr::rl {

using Net = Mlp<float>;

// Running mean/std of observations. Normalized values are clipped to
// [-clip, clip]; the std has a floor of `eps`.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(int dim, double eps = 1e-2, double clip = 5.0);

  void update(const Eigen::VectorXd& x);
  int dim() const { return static_cast<int>(sum_.size()); }
  double count() const { return count_; }
  Eigen::VectorXd mean() const;
  Eigen::VectorXd stddev() const;
  double eps() const { return eps_; }
  double clip() const { return clip_; }

  Eigen::MatrixXf normalize(const Eigen::MatrixXf& x) const;

  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);

 private:
  void refresh();

  double eps_ = 1e-2, clip_ = 5.0, count_ = 0.0;
  Eigen::VectorXd sum_, sumsq_;
  Eigen::VectorXf mean_f_, inv_std_f_;
};

struct ExplorationNoise {
  double rotation_std = deg2rad(2.0);  // rad
  double extension_std = 0.5;          // mm
  double random_action_prob = 0.2;

  static ExplorationNoise none() { return {0.0, 0.0, 0.0}; }
};

struct TrainConfig {
  long long total_timesteps = 3'000'000;
  double curriculum_fraction = 0.5;  // N_ts = fraction * total_timesteps
  std::vector<int> hidden = {256, 256, 256};
  Activation hidden_activation = Activation::Relu;
  int batch_size = 256;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double gamma = 0.95;
  double tau = 0.005;
  double action_l2 = 1.0;
  int her_k = 4;
  std::size_t buffer_capacity = kDefaultBufferCapacity;
  double updates_per_step = 0.5;
  long long warmup_steps = 1000;  // uniform random actions
  ExplorationNoise exploration;
  long long log_interval = 5000;
  long long eval_interval = 0;  // 0 disables in-training evaluation
  int eval_episodes = 20;
  std::uint64_t seed = 0;

  long long curriculum_steps() const {
    return static_cast<long long>(curriculum_fraction * static_cast<double>(total_timesteps));
  }
};

TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& cfg);

// Everything needed to act and to resume inspection of a run.
struct Checkpoint {
  static constexpr int kVersion = 1;
  int obs_dim = 0;
  Net actor, critic;
  Normalizer normalizer;
  nlohmann::json env_config;
  nlohmann::json train_config;
  std::string config_hash;
  std::string rng_state;
  long long timesteps = 0;
};

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Normalized action in [-1, 1]^6. Stochastic mode draws a uniform random
// action with probability noise.random_action_prob, otherwise adds Gaussian
// noise per channel before clipping.
Eigen::Matrix<double, 6, 1> act_normalized(const Net& actor, const Normalizer& norm, const Eigen::VectorXd& state,
                                           bool deterministic, const ExplorationNoise& noise, Rng& rng);

ActionVector act(const Checkpoint& ck, const Eigen::VectorXd& state, bool deterministic,
                 const ExplorationNoise& noise, Rng& rng);
// Deterministic shorthand.
ActionVector act(const Checkpoint& ck, const Eigen::VectorXd& state);

struct TrainLogRow {
  long long timestep = 0;
  long long episodes = 0;
  double mean_episode_reward = 0.0;
  double success_rate = 0.0;
  double tolerance = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double eval_success_rate = -1.0;  // -1 when not evaluated
};

void write_train_log_csv(const std::vector<TrainLogRow>& rows, std::ostream& out);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogRow> log;
};

// Builds an environment; the trainer overrides its curriculum length.
using EnvFactory = std::function<CtrEnv()>;

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
};

class DdpgLearner {
 public:
  DdpgLearner(int obs_dim, const TrainConfig& cfg, Rng& rng);

  // One critic and one actor step on a normalized batch, then a soft target update.
  UpdateStats update(const Batch& normalized_batch);

  const Net& actor() const { return actor_; }
  const Net& critic() const { return critic_; }
  Net& actor() { return actor_; }
  Net& critic() { return critic_; }
  const Net& target_actor() const { return actor_target_; }
  const Net& target_critic() const { return critic_target_; }
  void sync_targets();

 private:
  TrainConfig cfg_;
  Net actor_, critic_, actor_target_, critic_target_;
  Adam<float> actor_opt_, critic_opt_;
};

// Progress callback receives each log row as it is produced.
TrainResult train(const EnvFactory& make_env, const TrainConfig& cfg,
                  const std::function<void(const TrainLogRow&)>& on_log = {});

}  // namespace ctr::rl
