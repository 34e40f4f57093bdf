#pragma once

// Inverse-kinematics evaluation batteries and the analyses built on them.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctr/env.hpp"
#include "ctr/rl/ddpg.hpp"

namespace ctr::eval {

inline constexpr double kSuccessThreshold = 1.0;  // mm, strict
inline constexpr double kLargeErrorThreshold = 2.0;  // mm
inline constexpr int kDefaultEpisodes = 1000;

// Anything that can drive an episode. Agents may act on the environment
// directly (the oracle teleports to the goal joints) before returning an action.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual ActionVector act(CtrEnv& env) = 0;
};

// Built once per episode with that episode's seed.
using AgentFactory = std::function<std::unique_ptr<Agent>(std::uint64_t episode_seed)>;

AgentFactory policy_agent(std::shared_ptr<const rl::Checkpoint> ck);
AgentFactory random_agent();
AgentFactory oracle_agent();

struct EvalOptions {
  int episodes = kDefaultEpisodes;
  int step_budget = 0;  // 0: the environment's max_episode_steps
  double tolerance = kSuccessThreshold;
  std::uint64_t seed = 0;
  int workers = 1;
  std::optional<int> system_index;  // pin one registry entry
};

struct EpisodeRecord {
  int episode = 0;
  int system_index = 0;
  JointConfig start_q, final_q;
  Eigen::Vector3d start_tip = Eigen::Vector3d::Zero();
  Eigen::Vector3d desired = Eigen::Vector3d::Zero();
  Eigen::Vector3d achieved = Eigen::Vector3d::Zero();
  double error = 0.0;             // noiseless final error, mm
  double initial_distance = 0.0;  // |start tip - desired|, mm
  int steps = 0;
  bool success = false;           // error < kSuccessThreshold
};

struct IkEvalReport {
  std::vector<EpisodeRecord> episodes;
  int step_budget = 0;
  double tolerance = kSuccessThreshold;
  std::uint64_t seed = 0;

  double mean_error() const;
  double std_error() const;  // population std
  double success_rate() const;
  // Restricted to one registry entry; empty reports give NaN.
  IkEvalReport for_system(int index) const;
};

// Deterministic given options.seed; results are merged by episode index, so
// any worker count yields the same report.
IkEvalReport evaluate_ik(const AgentFactory& agent, const EnvConfig& env_cfg, const EvalOptions& opts = {});

// Convenience over a checkpoint; throws DimensionMismatch on incompatible dims.
IkEvalReport evaluate_ik(const rl::Checkpoint& ck, const EnvConfig& env_cfg, const EvalOptions& opts = {});

// Header lines start with '#' and carry the budget, tolerance and seed.
void write_report_csv(const IkEvalReport& r, std::ostream& out);
IkEvalReport read_report_csv(std::istream& in);

struct ErrorRegression {
  double slope = 0.0;      // mm of final error per mm of initial distance
  double intercept = 0.0;  // mm
};

// Ordinary least squares of final error on initial goal distance.
ErrorRegression error_regression(const IkEvalReport& r);
ErrorRegression fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct WorkspaceExport {
  std::filesystem::path all, filtered;
  std::filesystem::path polar[3];
  std::size_t rows = 0;
  std::size_t filtered_rows = 0;
};

// <dir>/<prefix>_workspace.csv        x,y,z,error (achieved tip)
// <dir>/<prefix>_workspace_gt2mm.csv  rows with error > 2 mm
// <dir>/<prefix>_polar_tube<i>.csv    alpha_deg,error (final rotation wrapped to (-180, 180])
WorkspaceExport export_workspace_errors(const IkEvalReport& r, const std::filesystem::path& dir,
                                        const std::string& prefix = "eval");

// 100 * error / L1.
double percent_of_length(double error_mm, const CtrSystem& sys);

}  // namespace ctr::eval
