#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mcf/errors.hpp"
#include "mcf/fourier_optics.hpp"
#include "mcf/kernel_layout.hpp"

namespace mcf {

enum class StepRule { fixed, adaptive_moment };

struct OptimizerConfig {
  int iterations = 2000;
  StepRule step_rule = StepRule::adaptive_moment;
  double learning_rate = 0.05;
  uint64_t seed = 0;
  int log_every = 0;  // 0 disables checkpoint callbacks

  void validate() const;
};

struct OptimizationTrace {
  // losses[i] is the loss of the current iterate entering iteration i;
  // the last entry is the loss after the final update.
  std::vector<double> losses;
  double initial_loss = 0.0;
  double final_loss = 0.0;  // loss of the returned (best-so-far) phase
  double wall_seconds = 0.0;
};

class DivergenceError : public RuntimeFailure {
 public:
  DivergenceError(const std::string& msg, OptimizationTrace t)
      : RuntimeFailure(msg), trace(std::move(t)) {}
  OptimizationTrace trace;
};

// Sum over channels and pixels of (achieved PSF - target)^2.
double psf_loss(const PhaseProfile& phase, const TargetPsf& target);

// Analytic gradient, two FFTs per channel: with t = exp(i*phase),
// u = F^-1 t and R = |u|^2 - target, the per-channel gradient is
// 4 * Im(conj(t) * F{R * u}).
std::vector<RealGrid> psf_loss_gradient(const PhaseProfile& phase,
                                        const TargetPsf& target);

using CheckpointFn =
    std::function<void(int iteration, const PhaseProfile& phase, double loss)>;

// Seeded uniform random start in [0, 2*pi), per-channel independent
// updates, best-so-far result. Throws DivergenceError (carrying the
// trace) when the loss exceeds 10x the initial loss for 50 consecutive
// iterations.
std::pair<PhaseProfile, OptimizationTrace> optimize_phase(
    const TargetPsf& target, const OptimizerConfig& config,
    const CheckpointFn& checkpoint = nullptr);

}  // namespace mcf
