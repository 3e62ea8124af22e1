#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "geofill/objective.hpp"
#include "geofill/params.hpp"

namespace geofill {

struct DiffGradState {
  ParamVector m = ParamVector::Zero();
  ParamVector v = ParamVector::Zero();
  ParamVector g_prev = ParamVector::Zero();
  int step = 0;
};

struct DiffGradConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// 1 marks a parameter the optimizer may move.
using ParamMask = std::array<bool, 9>;
inline constexpr ParamMask kAllParams = {true, true, true, true, true, true, true, true, true};
inline constexpr ParamMask kPoseParams = {true, true, true, true, true, true, true, false, false};
inline constexpr ParamMask kDepthParams = {false, false, false, false, false, false, false, true, true};

/// One DiffGrad update. Bias-corrected moments, friction
/// 1 / (1 + exp(-|g_prev - g|)) per component. The quaternion is renormalized
/// afterwards. Throws DegenerateError on a non-finite gradient without
/// touching `params` or `state`.
void diffgrad_step(ParamVector& params, DiffGradState& state, const ParamVector& grad, double lr,
                   const ParamMask& mask = kAllParams, const DiffGradConfig& cfg = {});

/// |sum(recent half) - sum(older half)| / sum(recent half) over the last
/// m_hist losses; nullopt with fewer than m_hist values. Two zero sums give 0.
std::optional<double> convergence_epsilon(const std::vector<double>& history, int m_hist);
bool check_convergence(const std::vector<double>& history, int m_hist, double eps);

struct Schedule {
  int levels = 4;
  /// Cumulative iteration caps, coarse to fine; the last is the global max.
  std::vector<int> level_caps = {4000, 7000, 9000, 10000};
  double learning_rate = 1e-2;
  double eps_opt = 1e-6;
  int history_length = 10;

  void validate() const;
  /// Caps for `levels` stages summing to `max_iters`, with per-stage budgets
  /// proportional to L, L-1, ..., 1 (the default 4-level schedule).
  static std::vector<int> default_caps(int levels, int max_iters);
};

struct TraceEntry {
  int iteration = 0;  // global, 0-based
  int level = 0;      // pyramid level (0 = finest)
  LossBreakdown loss;
};

struct LevelSummary {
  int level = 0;
  int iterations = 0;
  bool converged = false;
  double best_loss = 0.0;
  ParamVector best_params = ParamVector::Zero();
};

struct OptimizeResult {
  ParamVector params = ParamVector::Zero();
  LossBreakdown initial_loss;  // at the finest level
  LossBreakdown final_loss;    // at the finest level
  std::vector<LevelSummary> levels;
  std::vector<TraceEntry> trace;
  int iterations = 0;
  bool degraded = false;
  std::string degraded_reason;
};

using TraceSink = std::function<void(const TraceEntry&)>;

/// Coarse-to-fine DiffGrad. Each stage restarts the moments, runs until the
/// convergence test passes or the cumulative cap is reached, and hands its
/// lowest-loss parameters to the next stage. An objective error ends the run
/// with the best parameters so far and `degraded` set.
OptimizeResult optimize_joint(const ParamVector& init, const JointObjective& objective,
                              const Schedule& schedule, const ParamMask& mask = kAllParams,
                              const TraceSink& sink = {});

}  // namespace geofill
