#include "tsopt/cgm.hpp"

#include <cmath>
#include <limits>

#include "tsopt/csv.hpp"
#include "tsopt/errors.hpp"

namespace tsopt {

BetaRule parse_beta_rule(const std::string& name) {
  if (name == "cross") return BetaRule::cross;
  if (name == "polak_ribiere") return BetaRule::polak_ribiere;
  throw ConfigError("unknown beta rule '" + name + "'");
}

const char* beta_rule_name(BetaRule rule) {
  return rule == BetaRule::cross ? "cross" : "polak_ribiere";
}

const char* status_name(TuningStatus status) {
  switch (status) {
    case TuningStatus::converged:
      return "converged";
    case TuningStatus::max_iter:
      return "max_iter";
    case TuningStatus::line_search_failure:
      return "line_search_failure";
  }
  return "?";
}

void CgmConfig::validate(Index p) const {
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must be in (0, 1)");
  if (!(sigma > 0.0 && sigma < 1.0)) throw ConfigError("sigma must be in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (max_iter < 0) throw ConfigError("max_iter must be nonnegative");
  if (max_backtracks < 0) throw ConfigError("max_backtracks must be nonnegative");
  if (lower.size() != p || upper.size() != p) throw ConfigError("bounds must have one entry per parameter");
  for (Index i = 0; i < p; ++i) {
    if (!(lower[i] < upper[i])) throw ConfigError("each lower bound must be below its upper bound");
  }
}

Vector project_to_box(const Vector& lambda, const Vector& lower, const Vector& upper) {
  return lambda.cwiseMax(lower).cwiseMin(upper);
}

Vector projected_gradient(const Vector& grad, const Vector& lambda, const Vector& lower,
                          const Vector& upper) {
  Vector g = grad;
  for (Index i = 0; i < g.size(); ++i) {
    if ((lambda[i] <= lower[i] && g[i] > 0.0) || (lambda[i] >= upper[i] && g[i] < 0.0)) g[i] = 0.0;
  }
  return g;
}

ArmijoResult armijo_search(const Objective& objective, const Vector& lambda, double value,
                           const Vector& direction, const Vector& grad, const CgmConfig& config) {
  const double slope = grad.dot(direction);
  if (!(slope < 0.0)) throw ConfigError("line search needs a descent direction");
  ArmijoResult out;
  double alpha = 1.0;
  for (int m = 0; m <= config.max_backtracks; ++m, alpha *= config.rho) {
    const Vector raw = lambda + alpha * direction;
    const Vector trial = project_to_box(raw, config.lower, config.upper);
    ArmijoTrial t;
    t.m = m;
    t.alpha = alpha;
    t.required = -config.sigma * alpha * slope;
    try {
      t.value = objective.evaluate(trial, false).value;
      t.decrease = value - t.value;
      t.accepted = t.decrease >= t.required;
    } catch (const ObjectiveError&) {
      t.value = std::numeric_limits<double>::quiet_NaN();
      t.decrease = t.value;
      t.evaluation_failed = true;
    }
    out.trials.push_back(t);
    if (t.accepted) {
      out.success = true;
      out.m = m;
      out.alpha = alpha;
      out.lambda = trial;
      out.value = t.value;
      out.clipped = trial != raw;
      return out;
    }
  }
  return out;
}

DirectionUpdate cgm_direction(const Vector& grad_new, const Vector& grad_old, const Vector& d_old,
                              BetaRule rule) {
  if (grad_new.size() != grad_old.size() || grad_new.size() != d_old.size()) {
    throw StructuralError("direction update vectors differ in length");
  }
  DirectionUpdate out;
  const double numerator = grad_new.dot(grad_new - grad_old);
  const double denominator = rule == BetaRule::cross ? grad_new.dot(grad_old) : grad_old.dot(grad_old);
  if (denominator != 0.0 && std::isfinite(numerator / denominator)) out.beta = numerator / denominator;
  else out.reset = true;
  if (out.beta < 0.0) {
    out.beta = 0.0;
    out.reset = true;
  }
  out.direction = -grad_new + out.beta * d_old;
  if (out.beta != 0.0 && !(grad_new.dot(out.direction) < 0.0)) {
    out.beta = 0.0;
    out.reset = true;
    out.direction = -grad_new;
  }
  if (out.beta == 0.0) out.reset = true;
  return out;
}

namespace {

/// Zero components that would leave the box from an active bound.
Vector mask_direction(const Vector& d, const Vector& lambda, const CgmConfig& c) {
  Vector out = d;
  for (Index i = 0; i < d.size(); ++i) {
    if ((lambda[i] <= c.lower[i] && d[i] < 0.0) || (lambda[i] >= c.upper[i] && d[i] > 0.0)) out[i] = 0.0;
  }
  return out;
}

}  // namespace

TuningResult tune(const Objective& objective, const Vector& lambda0, const CgmConfig& config) {
  const Index p = objective.dimension();
  config.validate(p);
  if (lambda0.size() != p) throw StructuralError("initial parameter vector has wrong length");
  if (project_to_box(lambda0, config.lower, config.upper) != lambda0) {
    throw ConfigError("initial parameters lie outside the bounds");
  }

  TuningResult result;
  ObjectiveValue eval = objective.evaluate(lambda0, true);
  ++result.evaluations;

  TuningIterate cur;
  cur.iter = 0;
  cur.lambda = lambda0;
  cur.value = eval.value;
  cur.gradient = *eval.gradient;
  Vector pg = projected_gradient(cur.gradient, cur.lambda, config.lower, config.upper);
  cur.grad_norm = pg.norm();
  Vector d = -pg;
  cur.reset = true;

  while (true) {
    if (cur.grad_norm < config.epsilon) {
      result.status = TuningStatus::converged;
      break;
    }
    if (cur.iter >= config.max_iter) {
      result.status = TuningStatus::max_iter;
      break;
    }
    cur.direction = d;
    cur.slope = cur.gradient.dot(d);
    ArmijoResult ls = armijo_search(objective, cur.lambda, cur.value, d, cur.gradient, config);
    result.evaluations += static_cast<int>(ls.trials.size());
    cur.trials = ls.trials;
    if (!ls.success) {
      result.status = TuningStatus::line_search_failure;
      break;
    }
    cur.alpha = ls.alpha;
    cur.m = ls.m;
    result.iterates.push_back(cur);

    TuningIterate next;
    next.iter = cur.iter + 1;
    next.lambda = ls.lambda;
    eval = objective.evaluate(next.lambda, true);
    ++result.evaluations;
    next.value = eval.value;
    next.gradient = *eval.gradient;
    const Vector pg_new = projected_gradient(next.gradient, next.lambda, config.lower, config.upper);
    next.grad_norm = pg_new.norm();

    if (ls.clipped) {
      d = -pg_new;
      next.reset = true;
    } else {
      DirectionUpdate up = cgm_direction(pg_new, pg, d, config.beta_rule);
      const Vector masked = mask_direction(up.direction, next.lambda, config);
      if (masked != up.direction || !(next.gradient.dot(masked) < 0.0)) {
        d = -pg_new;
        next.reset = true;
      } else {
        d = masked;
        next.beta = up.beta;
        next.reset = up.reset;
      }
    }
    pg = pg_new;
    cur = std::move(next);
  }
  cur.direction.resize(0);
  cur.alpha = 0.0;
  cur.m = -1;
  result.iterates.push_back(cur);
  result.lambda_star = cur.lambda;
  result.value = cur.value;
  return result;
}

void write_tuning_trace(const std::string& path, const TuningResult& result,
                        const std::vector<std::string>& lambda_names) {
  std::vector<std::string> header{"iter", "J", "grad_norm", "alpha", "beta", "reset"};
  header.insert(header.end(), lambda_names.begin(), lambda_names.end());
  CsvWriter csv(path, "tsopt-tuning", 1, header);
  for (const TuningIterate& it : result.iterates) {
    csv.cell(static_cast<long long>(it.iter));
    csv.cell(it.value);
    csv.cell(it.grad_norm);
    csv.cell(it.alpha);
    csv.cell(it.beta);
    csv.cell(static_cast<long long>(it.reset ? 1 : 0));
    for (Index i = 0; i < it.lambda.size(); ++i) csv.cell(it.lambda[i]);
    csv.end_row();
  }
}

}  // namespace tsopt
