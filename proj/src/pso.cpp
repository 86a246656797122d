#include "cmit/pso.hpp"

#include <algorithm>
#include <cmath>

#include "cmit/error.hpp"
#include "cmit/rng.hpp"

namespace cmit {

EnsembleTrainingSet build_ensemble_set(const std::vector<double>& first_preds,
                                       const std::vector<double>& second_preds,
                                       const std::vector<double>& truths) {
  if (first_preds.size() != truths.size() || second_preds.size() != truths.size()) {
    throw ArgumentError("ensemble set: length mismatch");
  }
  if (truths.empty()) throw ArgumentError("ensemble set: empty inputs");
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (!std::isfinite(first_preds[i]) || !std::isfinite(second_preds[i]) ||
        !std::isfinite(truths[i])) {
      throw ArgumentError("ensemble set: non-finite entry at step " + std::to_string(i));
    }
    if (truths[i] <= 0.0) {
      throw ArgumentError("ensemble set: nonpositive truth at step " + std::to_string(i));
    }
  }
  return {{first_preds, second_preds}, truths};
}

double ensemble_objective(const EnsembleTrainingSet& set, std::span<const double> w) {
  if (w.size() != set.n_models()) {
    throw ArgumentError("objective: weight length does not match model count");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < set.n_steps(); ++i) {
    double fused = 0.0;
    for (std::size_t j = 0; j < set.n_models(); ++j) {
      fused += w[j] * set.model_preds[j][i];
    }
    const double r = set.truths[i] - fused;
    acc += r * r;
  }
  return std::sqrt(acc);
}

void SwarmConfig::validate() const {
  if (particles < 2) throw ConfigError("swarm: need at least 2 particles");
  if (iterations < 1) throw ConfigError("swarm: need at least 1 iteration");
  if (omega <= 0.0 || omega > 1.0) throw ConfigError("swarm: omega must be in (0, 1]");
  if (c1 <= 0.0 || c2 <= 0.0) throw ConfigError("swarm: c1, c2 must be positive");
}

void project_to_simplex(std::vector<double>& w) {
  double sum = 0.0;
  for (double& x : w) {
    x = std::clamp(x, 0.0, 1.0);
    sum += x;
  }
  if (sum <= 0.0) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return;
  }
  for (double& x : w) x /= sum;
}

double combine(std::span<const double> preds, std::span<const double> w) {
  if (preds.size() != w.size()) throw ArgumentError("combine: length mismatch");
  double out = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) out += w[j] * preds[j];
  return out;
}

PsoResult pso_fit(const EnsembleTrainingSet& set, const SwarmConfig& cfg,
                  const SwarmObserver& observer) {
  cfg.validate();
  const std::size_t m = set.n_models();
  if (m < 2) throw ArgumentError("pso_fit: need at least 2 models");
  if (set.n_steps() == 0) throw ArgumentError("pso_fit: empty training set");

  Rng rng(cfg.seed);
  std::vector<Particle> swarm(cfg.particles);
  for (std::size_t i = 0; i < swarm.size(); ++i) {
    Particle& p = swarm[i];
    p.w.assign(m, 0.0);
    if (i < m) {
      p.w[i] = 1.0;  // unit-corner seeds: fused result can't lose to model i
    } else {
      // uniform on the simplex via normalized exponentials
      double sum = 0.0;
      for (double& x : p.w) {
        x = -std::log(rng.uniform_open01());
        sum += x;
      }
      for (double& x : p.w) x /= sum;
    }
    p.v.resize(m);
    for (double& x : p.v) x = 2.0 * rng.uniform01() - 1.0;
    p.pbest_w = p.w;
    p.pbest_f = ensemble_objective(set, p.w);
  }

  std::size_t gbest = 0;
  for (std::size_t i = 1; i < swarm.size(); ++i) {
    if (swarm[i].pbest_f < swarm[gbest].pbest_f) gbest = i;
  }
  std::vector<double> gbest_w = swarm[gbest].pbest_w;
  double gbest_f = swarm[gbest].pbest_f;

  PsoResult result;
  result.trace.push_back(gbest_f);
  if (observer) observer(0, swarm);

  auto draw_r = [&] {
    return cfg.r_distribution == RandomCoefficients::standard_normal ? rng.normal01()
                                                                     : rng.uniform01();
  };

  for (std::size_t iter = 1; iter <= cfg.iterations; ++iter) {
    for (auto& p : swarm) {
      const double r1 = draw_r();
      const double r2 = draw_r();
      for (std::size_t j = 0; j < m; ++j) {
        double v = cfg.omega * p.v[j] + cfg.c1 * r1 * (p.pbest_w[j] - p.w[j]) +
                   cfg.c2 * r2 * (gbest_w[j] - p.w[j]);
        p.v[j] = std::clamp(v, -1.0, 1.0);
        const double base =
            cfg.position_update == PositionUpdate::paper ? cfg.omega * p.w[j] : p.w[j];
        p.w[j] = base + p.v[j];
      }
      project_to_simplex(p.w);
      const double f = ensemble_objective(set, p.w);
      if (f < p.pbest_f) {
        p.pbest_f = f;
        p.pbest_w = p.w;
      }
      if (p.pbest_f < gbest_f) {
        gbest_f = p.pbest_f;
        gbest_w = p.pbest_w;
      }
    }
    result.trace.push_back(gbest_f);
    if (observer) observer(iter, swarm);
  }

  result.w = gbest_w;
  result.objective = gbest_f;
  return result;
}

}  // namespace cmit
