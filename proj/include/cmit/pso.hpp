#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cmit {

/// Paired per-time-step model predictions (one column per model) and the
/// observed values they try to match.
struct EnsembleTrainingSet {
  std::vector<std::vector<double>> model_preds;  // [n_models][n_steps]
  std::vector<double> truths;                    // [n_steps], strictly positive

  std::size_t n_models() const { return model_preds.size(); }
  std::size_t n_steps() const { return truths.size(); }
};

/// Two-model assembly: columns are (first, second), truths are the targets.
EnsembleTrainingSet build_ensemble_set(const std::vector<double>& first_preds,
                                       const std::vector<double>& second_preds,
                                       const std::vector<double>& truths);

/// Euclidean norm of the residual between truths and the w-weighted
/// combination of the prediction columns.
double ensemble_objective(const EnsembleTrainingSet& set, std::span<const double> w);

enum class RandomCoefficients { standard_normal, uniform01 };
enum class PositionUpdate { paper, standard };

struct SwarmConfig {
  std::size_t particles = 30;
  std::size_t iterations = 100;
  double omega = 0.7;
  double c1 = 1.5;
  double c2 = 1.5;
  RandomCoefficients r_distribution = RandomCoefficients::standard_normal;
  PositionUpdate position_update = PositionUpdate::paper;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Particle {
  std::vector<double> w;        // simplex position
  std::vector<double> v;        // velocity, each component in [-1, 1]
  std::vector<double> pbest_w;
  double pbest_f = 0.0;
};

struct PsoResult {
  std::vector<double> w;       // best weights found (on the simplex)
  double objective = 0.0;      // objective at w
  std::vector<double> trace;   // best-so-far objective per iteration (incl. init)
};

/// Observer invoked after every iteration with the current swarm; used by
/// tests to assert per-iteration invariants.
using SwarmObserver = std::function<void(std::size_t iteration, const std::vector<Particle>&)>;

/// Simplex-constrained particle swarm fit of combination weights. The first
/// min(n_models, particles) particles start at the unit corners, so the
/// result never loses to any single model on the fitting set; the remaining
/// particles start uniformly on the simplex. Deterministic per seed.
PsoResult pso_fit(const EnsembleTrainingSet& set, const SwarmConfig& cfg,
                  const SwarmObserver& observer = nullptr);

/// Weighted fusion of per-model predictions.
double combine(std::span<const double> preds, std::span<const double> w);

/// Clip to [0,1] and renormalize; uniform fallback when everything clips to 0.
void project_to_simplex(std::vector<double>& w);

}  // namespace cmit
