#include "mcf/phase_optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "mcf/fft.hpp"
#include "mcf/rng.hpp"
#include "mcf/simd.hpp"

namespace mcf {

namespace {

void check_shapes(const PhaseProfile& phase, const TargetPsf& target) {
  phase.validate("psf_loss phase");
  if (target.n != phase.n) throw InvalidInput("psf loss: plane size mismatch");
  if (int(target.channels.size()) != phase.channel_count())
    throw InvalidInput("psf loss: channel count mismatch");
  for (const auto& ch : target.channels)
    if (ch.rows != target.n || ch.cols != target.n)
      throw InvalidInput("psf loss: target channel shape mismatch");
}

// Loss and (optionally) gradient for one channel against a corner-indexed
// target. Reuses the transfer function and field from the forward map.
double channel_loss_grad(const RealGrid& phase, const RealGrid& target_corner,
                         RealGrid* grad) {
  const int n = phase.rows;
  const std::size_t sz = std::size_t(n) * n;
  ChannelField f = psf_channel_fields(phase);

  RealGrid residual(n, n);
  double loss = simd::active().residual_sq_sum(f.psf_corner.data(), target_corner.data(),
                                               residual.data(), sz);
  if (grad) {
    CplxGrid w(n, n);
    simd::active().cplx_scale_real(reinterpret_cast<const double*>(f.u.data()),
                                   residual.data(), reinterpret_cast<double*>(w.data()),
                                   sz);
    fft::fft2d(w, fft::Dir::forward);
    if (grad->rows != n || grad->cols != n) *grad = RealGrid(n, n);
    simd::active().imag_conj_mul(reinterpret_cast<const double*>(f.t.data()),
                                 reinterpret_cast<const double*>(w.data()), 4.0,
                                 grad->data(), sz);
  }
  return loss;
}

std::vector<RealGrid> corner_targets(const TargetPsf& target) {
  std::vector<RealGrid> out;
  out.reserve(target.channels.size());
  for (const auto& ch : target.channels) out.push_back(fft::fftshift(ch));
  return out;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (iterations < 1) throw InvalidInput("optimizer: iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidInput("optimizer: learning rate must be > 0");
  if (log_every < 0) throw InvalidInput("optimizer: log_every must be >= 0");
}

double psf_loss(const PhaseProfile& phase, const TargetPsf& target) {
  check_shapes(phase, target);
  double total = 0.0;
  for (int c = 0; c < phase.channel_count(); ++c)
    total += channel_loss_grad(phase.channels[std::size_t(c)],
                               fft::fftshift(target.channels[std::size_t(c)]), nullptr);
  return total;
}

std::vector<RealGrid> psf_loss_gradient(const PhaseProfile& phase,
                                        const TargetPsf& target) {
  check_shapes(phase, target);
  std::vector<RealGrid> grads(std::size_t(phase.channel_count()));
  for (int c = 0; c < phase.channel_count(); ++c)
    channel_loss_grad(phase.channels[std::size_t(c)],
                      fft::fftshift(target.channels[std::size_t(c)]),
                      &grads[std::size_t(c)]);
  return grads;
}

std::pair<PhaseProfile, OptimizationTrace> optimize_phase(const TargetPsf& target,
                                                          const OptimizerConfig& config,
                                                          const CheckpointFn& checkpoint) {
  config.validate();
  if (target.n < 2 || target.channels.empty())
    throw InvalidInput("optimize_phase: empty target");
  const int channels = int(target.channels.size());
  const int n = target.n;
  const std::size_t sz = std::size_t(n) * n;

  auto t0 = std::chrono::steady_clock::now();
  std::vector<RealGrid> corner = corner_targets(target);

  PhaseProfile phase;
  phase.n = n;
  for (int c = 0; c < channels; ++c) {
    RealGrid g(n, n);
    for (std::size_t i = 0; i < sz; ++i)
      g.v[i] = rng::kTwoPi * rng::uniform(config.seed, rng::stream::kPhaseInit + c, i);
    phase.channels.push_back(std::move(g));
  }
  phase.validate("optimize_phase start");

  PhaseProfile best = phase;
  std::vector<double> best_loss(std::size_t(channels),
                                std::numeric_limits<double>::infinity());
  std::vector<RealGrid> m, v;
  if (config.step_rule == StepRule::adaptive_moment) {
    m.assign(std::size_t(channels), RealGrid(n, n));
    v.assign(std::size_t(channels), RealGrid(n, n));
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  OptimizationTrace trace;
  trace.losses.reserve(std::size_t(config.iterations) + 1);
  RealGrid grad(n, n);
  int high_streak = 0;

  auto note_best = [&](int c, double loss) {
    if (loss < best_loss[std::size_t(c)]) {
      best_loss[std::size_t(c)] = loss;
      best.channels[std::size_t(c)] = phase.channels[std::size_t(c)];
    }
  };

  for (int it = 0; it < config.iterations; ++it) {
    double total = 0.0;
    for (int c = 0; c < channels; ++c) {
      RealGrid& ph = phase.channels[std::size_t(c)];
      double loss = channel_loss_grad(ph, corner[std::size_t(c)], &grad);
      total += loss;
      note_best(c, loss);

      if (config.step_rule == StepRule::fixed) {
        simd::active().axpy(-config.learning_rate, grad.data(), ph.data(), sz);
      } else {
        const double bc1 = 1.0 - std::pow(kBeta1, double(it + 1));
        const double bc2 = 1.0 - std::pow(kBeta2, double(it + 1));
        RealGrid& mc = m[std::size_t(c)];
        RealGrid& vc = v[std::size_t(c)];
        for (std::size_t i = 0; i < sz; ++i) {
          double g = grad.v[i];
          mc.v[i] = kBeta1 * mc.v[i] + (1.0 - kBeta1) * g;
          vc.v[i] = kBeta2 * vc.v[i] + (1.0 - kBeta2) * g * g;
          double mhat = mc.v[i] / bc1;
          double vhat = vc.v[i] / bc2;
          ph.v[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + kEps);
        }
      }
    }
    trace.losses.push_back(total);

    if (total > 10.0 * trace.losses.front()) {
      if (++high_streak >= 50) {
        trace.initial_loss = trace.losses.front();
        trace.final_loss = trace.losses.back();
        trace.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        throw DivergenceError("phase optimization diverged: loss exceeded 10x the "
                              "initial value for 50 consecutive iterations",
                              std::move(trace));
      }
    } else {
      high_streak = 0;
    }

    if (checkpoint && config.log_every > 0 && (it + 1) % config.log_every == 0)
      checkpoint(it + 1, phase, total);
  }

  // Loss of the final iterate, so the last update is also considered.
  double final_total = 0.0;
  for (int c = 0; c < channels; ++c) {
    double loss =
        channel_loss_grad(phase.channels[std::size_t(c)], corner[std::size_t(c)], nullptr);
    final_total += loss;
    note_best(c, loss);
  }
  trace.losses.push_back(final_total);

  trace.initial_loss = trace.losses.front();
  trace.final_loss = 0.0;
  for (double b : best_loss) trace.final_loss += b;
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(best), std::move(trace)};
}

}  // namespace mcf
