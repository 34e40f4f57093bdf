#pragma once

// Goal-conditioned reaching MDP over a registry of CTR systems.
//
// Observation layout (single system, 13 values):
//   [cos a1, sin a1, b1, cos a2, sin a2, b2, cos a3, sin a3, b3,  (joint frame per config)
//    Ga - Gd (3, mm), tolerance (mm)]
// Multi-system mode appends the system specifier (1 value scaled to [0, 1], or
// a one-hot block).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "ctr/jointspace.hpp"
#include "ctr/kinematics.hpp"
#include "ctr/systems.hpp"

namespace ctr {

inline constexpr int kGoalDeltaOffset = 9;
inline constexpr int kToleranceOffset = 12;
inline constexpr int kBaseObservationDim = 13;
inline constexpr int kActionDim = 6;

enum class CurriculumKind { Constant, Linear, Decay };

struct Curriculum {
  CurriculumKind kind = CurriculumKind::Decay;
  double initial = 20.0;  // mm
  double final = 1.0;     // mm
  double steps = 1.5e6;   // N_ts
};

// Goal tolerance at training timestep t.
double tolerance(const Curriculum& cur, double t);

// Gear ratio between rotation encoder and extension travel, meters per radian.
inline constexpr double kExtensionGearRatio = 0.001;

struct NoiseSpec {
  double rotation_encoder_std_deg = 1.0;
  double extension_encoder_std_mm = 0.0;  // see defaults()
  double tracking_std_mm = 0.8;

  // 1 deg encoder noise, extension noise through the gear ratio, 0.8 mm tracking.
  static NoiseSpec defaults();
  static NoiseSpec none() { return {0.0, 0.0, 0.0}; }
  bool is_zero() const;
};

// Extension encoder std (mm) implied by a rotation encoder std and gear ratio (m/rad).
double extension_std_from_gear_ratio(double rotation_std_deg, double gear_ratio = kExtensionGearRatio);

struct NoisyReading {
  JointConfig q;
  Eigen::Vector3d achieved_goal;
};

NoisyReading observe_with_noise(const JointConfig& q, const Eigen::Vector3d& achieved_goal, const NoiseSpec& spec,
                                Rng& rng);

enum class SamplerKind { Uniform, LengthProportional };

class SystemSampler {
 public:
  SystemSampler(SamplerKind kind, const std::vector<CtrSystem>& systems);
  const std::vector<double>& probabilities() const { return probs_; }
  int sample(Rng& rng) const;

 private:
  std::vector<double> probs_;
};

enum class SystemEncoding { Scaled, OneHot };

// Pure observation assembly; q is proprioceptive and converted to `frame`.
Eigen::VectorXd assemble_observation(const JointConfig& q, const Eigen::Vector3d& achieved_goal,
                                     const Eigen::Vector3d& desired_goal, double tolerance, JointFrame frame,
                                     const Eigen::VectorXd& system_code = {});

// Replay record. `action` is normalized to [-1, 1]^6; achieved_goal is the
// noiseless tip after the action.
struct Transition {
  Eigen::VectorXd state;
  Eigen::Matrix<double, 6, 1> action = Eigen::Matrix<double, 6, 1>::Zero();
  double reward = -1.0;
  Eigen::VectorXd next_state;
  Eigen::Vector3d achieved_goal = Eigen::Vector3d::Zero();
  Eigen::Vector3d desired_goal = Eigen::Vector3d::Zero();
  double tolerance = 0.0;
  bool terminal = false;
};

// Sparse reward: 0 if error <= tolerance, else -1.
inline double sparse_reward(double error, double tol) { return error <= tol ? 0.0 : -1.0; }

struct EnvConfig {
  std::vector<CtrSystem> systems;
  RotationMode rotation_mode = RotationMode::ConstraintFree;
  JointFrame joint_frame = JointFrame::Egocentric;
  Curriculum curriculum;
  std::optional<NoiseSpec> noise;
  bool reward_from_noisy = false;
  std::optional<DomainRandomizationSpec> randomization;
  SamplerKind sampler = SamplerKind::Uniform;
  SystemEncoding system_encoding = SystemEncoding::Scaled;
  std::optional<bool> include_system_id;  // default: more than one system
  int max_episode_steps = 150;
  KinematicsTier tier = KinematicsTier::Rigid;
  std::uint64_t seed = 0;
  // Degenerate task for sanity checks: the goal is the start tip.
  bool goal_equals_start = false;

  bool multi_system() const { return include_system_id.value_or(systems.size() > 1); }
  int observation_dim() const;
};

// `base_dir` resolves relative system file paths.
EnvConfig env_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json to_json(const EnvConfig& cfg);

struct StepInfo {
  Eigen::Vector3d achieved_goal = Eigen::Vector3d::Zero();  // noiseless
  Eigen::Vector3d desired_goal = Eigen::Vector3d::Zero();
  double error = 0.0;                                        // noiseless
  double tolerance = 0.0;
  JointConfig q;
  bool success = false;
  bool truncated = false;
  bool clamped = false;
  bool action_clipped = false;
  int system_index = 0;
};

struct StepResult {
  Eigen::VectorXd observation;
  double reward = -1.0;
  bool terminal = false;
  StepInfo info;
};

class CtrEnv {
 public:
  explicit CtrEnv(EnvConfig cfg);

  const EnvConfig& config() const { return cfg_; }
  int observation_dim() const { return cfg_.observation_dim(); }

  void seed(std::uint64_t s) { rng_.seed(s); }
  Rng& rng() { return rng_; }

  // Curriculum clock, fed by the trainer.
  void set_training_step(double t) { training_step_ = t; }
  double training_step() const { return training_step_; }
  // Pins the tolerance (evaluation uses the final tolerance); nullopt restores the curriculum.
  void set_fixed_tolerance(std::optional<double> tol) { fixed_tolerance_ = tol; }
  double tolerance() const;

  Eigen::VectorXd reset();
  StepResult step(const ActionVector& a);

  // Direct state access for controllers and evaluation harnesses.
  void set_system(int index);
  void set_joints(const JointConfig& q);
  void set_desired_goal(const Eigen::Vector3d& goal);
  // Forces reset() to use one registry entry instead of the sampler; nullopt restores sampling.
  void pin_system(std::optional<int> index);
  // Re-arms the episode: step counter to zero, terminal flag cleared.
  void begin_segment(int max_steps);

  const JointConfig& joints() const { return q_; }
  const JointConfig& goal_joints() const { return goal_q_; }
  const CtrSystem& system() const { return active_system_; }
  int system_index() const { return system_index_; }
  const Eigen::Vector3d& achieved_goal() const { return achieved_; }
  const Eigen::Vector3d& desired_goal() const { return desired_; }
  double error() const { return (achieved_ - desired_).norm(); }
  bool done() const { return done_; }
  int steps_taken() const { return steps_; }
  const Eigen::VectorXd& observation() const { return obs_; }
  Eigen::VectorXd system_code() const;

 private:
  void refresh_observation();

  EnvConfig cfg_;
  SystemSampler sampler_;
  Rng rng_;
  double training_step_ = 0.0;
  std::optional<double> fixed_tolerance_;
  std::optional<int> pinned_system_;
  int system_index_ = 0;
  CtrSystem active_system_;
  JointConfig q_, goal_q_;
  Eigen::Vector3d achieved_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d desired_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d observed_achieved_ = Eigen::Vector3d::Zero();
  Eigen::VectorXd obs_;
  int steps_ = 0;
  int max_steps_ = 0;
  bool done_ = true;
};

// Episode log rows: t, beta1..3, alpha1..3, Ga, Gd, e_t, r_t.
void write_episode_log_header(std::ostream& out);
void write_episode_log_row(std::ostream& out, int t, const StepResult& r);

}  // namespace ctr
