#include "geofill/optimizer.hpp"

#include <cmath>
#include <limits>

#include "geofill/error.hpp"

namespace geofill {

void diffgrad_step(ParamVector& params, DiffGradState& state, const ParamVector& grad, double lr,
                   const ParamMask& mask, const DiffGradConfig& cfg) {
  if (!grad.allFinite()) throw DegenerateError("optimizer: non-finite gradient");
  ParamVector g = grad;
  for (int i = 0; i < 9; ++i) {
    if (!mask[i]) g[i] = 0.0;
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, state.step);
  for (int i = 0; i < 9; ++i) {
    if (!mask[i]) continue;
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double xi = 1.0 / (1.0 + std::exp(-std::abs(state.g_prev[i] - g[i])));
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * xi * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
  state.g_prev = g;
  params.segment<4>(param::kQuat).normalize();
}

std::optional<double> convergence_epsilon(const std::vector<double>& history, int m_hist) {
  if (m_hist < 2 || static_cast<int>(history.size()) < m_hist) return std::nullopt;
  const int half = m_hist / 2;
  const std::size_t end = history.size();
  double recent = 0.0, older = 0.0;
  for (int i = 0; i < half; ++i) {
    recent += history[end - 1 - i];
    older += history[end - 1 - half - i];
  }
  if (recent == 0.0) return older == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(recent - older) / std::abs(recent);
}

bool check_convergence(const std::vector<double>& history, int m_hist, double eps) {
  const auto e = convergence_epsilon(history, m_hist);
  return e && *e < eps;
}

void Schedule::validate() const {
  if (levels < 1) throw PreconditionError("schedule: levels must be >= 1");
  if (static_cast<int>(level_caps.size()) != levels) {
    throw PreconditionError("schedule: need one cumulative cap per level (" +
                            std::to_string(levels) + "), got " +
                            std::to_string(level_caps.size()));
  }
  int prev = 0;
  for (int c : level_caps) {
    if (c <= prev) throw PreconditionError("schedule: level caps must be strictly increasing and positive");
    prev = c;
  }
  if (!(learning_rate > 0.0)) throw PreconditionError("schedule: learning rate must be positive");
  if (!(eps_opt >= 0.0)) throw PreconditionError("schedule: eps_opt must be >= 0");
  if (history_length < 2) throw PreconditionError("schedule: history length must be >= 2");
}

std::vector<int> Schedule::default_caps(int levels, int max_iters) {
  if (levels < 1 || max_iters < levels) {
    throw PreconditionError("schedule: need levels >= 1 and max_iters >= levels");
  }
  const double total = 0.5 * levels * (levels + 1);
  std::vector<int> caps;
  double cum = 0.0;
  int prev = 0;
  for (int i = 0; i < levels; ++i) {
    cum += levels - i;
    int c = static_cast<int>(std::lround(max_iters * cum / total));
    c = std::max(c, prev + 1);
    caps.push_back(c);
    prev = c;
  }
  caps.back() = max_iters;
  return caps;
}

OptimizeResult optimize_joint(const ParamVector& init, const JointObjective& objective,
                              const Schedule& schedule, const ParamMask& mask,
                              const TraceSink& sink) {
  schedule.validate();
  if (schedule.levels != objective.levels()) {
    throw PreconditionError("optimizer: schedule has " + std::to_string(schedule.levels) +
                            " levels, objective has " + std::to_string(objective.levels()));
  }
  OptimizeResult result;
  ParamVector handoff = init;
  handoff.segment<4>(param::kQuat).normalize();
  result.params = handoff;

  int iteration = 0;
  try {
    result.initial_loss = objective.evaluate(handoff, 0);
  } catch (const Error& e) {
    result.degraded = true;
    result.degraded_reason = e.what();
    return result;
  }

  for (int stage = 0; stage < schedule.levels; ++stage) {
    const int level = schedule.levels - 1 - stage;
    const int cap = schedule.level_caps[stage];
    LevelSummary summary;
    summary.level = level;
    summary.best_loss = std::numeric_limits<double>::infinity();
    summary.best_params = handoff;
    ParamVector params = handoff;
    DiffGradState state;
    std::vector<double> history;
    try {
      while (iteration < cap) {
        ParamVector grad = ParamVector::Zero();
        TraceEntry entry{iteration, level, objective.evaluate(params, level, &grad)};
        const double loss = entry.loss.total;
        if (!std::isfinite(loss)) throw DegenerateError("optimizer: non-finite loss");
        result.trace.push_back(entry);
        if (sink) sink(entry);
        if (loss < summary.best_loss) {
          summary.best_loss = loss;
          summary.best_params = params;
          if (level == 0) result.final_loss = entry.loss;
        }
        history.push_back(loss);
        if (static_cast<int>(history.size()) > schedule.history_length) history.erase(history.begin());
        ++iteration;
        ++summary.iterations;
        if (check_convergence(history, schedule.history_length, schedule.eps_opt)) {
          summary.converged = true;
          break;
        }
        diffgrad_step(params, state, grad, schedule.learning_rate, mask);
        if (std::abs(params.segment<4>(param::kQuat).norm() - 1.0) > 1e-9) {
          throw DegenerateError("optimizer: quaternion lost unit norm");
        }
      }
    } catch (const Error& e) {
      result.degraded = true;
      result.degraded_reason = std::string("level ") + std::to_string(level) + ": " + e.what();
    }
    if (summary.iterations > 0 && std::isfinite(summary.best_loss)) handoff = summary.best_params;
    result.levels.push_back(summary);
    if (result.degraded) break;
  }
  result.params = handoff;
  result.iterations = iteration;
  const LevelSummary& last = result.levels.back();
  if (result.degraded || last.level != 0 || !std::isfinite(last.best_loss)) {
    try {
      result.final_loss = objective.evaluate(handoff, 0);
    } catch (const Error&) {
      result.final_loss = result.initial_loss;
    }
  }
  return result;
}

}  // namespace geofill
