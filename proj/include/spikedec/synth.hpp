#ifndef SPIKEDEC_SYNTH_HPP
#define SPIKEDEC_SYNTH_HPP

// Seeded synthetic reaching data: a smooth 2-D latent velocity drives
// rectified-linear firing rates, and Poisson counts are drawn per bin.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "spikedec/error.hpp"
#include "spikedec/signal.hpp"

namespace spikedec::synth {

struct SynthSpec {
  std::size_t channels = 96;
  std::size_t duration_steps = 2500;
  // Expected spikes per bin at unit drive.
  double rate_scale = 0.5;
  // Cutoff of the one-pole low-pass applied to the latent noise, in Hz.
  double smoothness_hz = 1.0;
  double bin_ms = 4.0;
  std::uint64_t seed = 1;
};

struct SynthData {
  SpikeStream spikes;
  Trajectory velocity;
  // Expected count of each channel in each bin (time-major), before sampling.
  std::vector<double> rates;
};

inline SynthData gen_synth(const SynthSpec& spec) {
  if (spec.channels == 0) throw Error("synthetic data needs >= 1 channel");
  if (!(spec.rate_scale >= 0.0)) throw Error("rate_scale must be >= 0");
  if (!(spec.smoothness_hz > 0.0) || !(spec.bin_ms > 0.0)) throw Error("smoothness and bin width must be > 0");

  // Latent and tuning draws use their own engine so that rate_scale changes
  // only the Poisson sampling, never the latent velocity.
  std::mt19937_64 rng(spec.seed);
  std::seed_seq sampler_seed{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), 0x5eedu};
  std::mt19937_64 sampler(sampler_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Tuning: baseline in [0.5, 1.5], direction weights in [-1, 1].
  std::vector<std::array<double, 3>> tuning(spec.channels);
  for (auto& t : tuning) t = {1.0 + 0.5 * unit(rng), unit(rng), unit(rng)};

  const double dt = spec.bin_ms / 1000.0;
  const double alpha = 1.0 - std::exp(-2.0 * std::numbers::pi * spec.smoothness_hz * dt);
  // Stationary std of the filtered noise is sqrt(alpha / (2 - alpha)).
  const double gain = std::sqrt((2.0 - alpha) / alpha);

  SynthData out;
  out.spikes = SpikeStream(spec.channels, spec.duration_steps, spec.bin_ms);
  out.velocity.start_ms = 0.0;
  out.velocity.step_ms = spec.bin_ms;
  out.velocity.samples.resize(spec.duration_steps);
  out.rates.resize(spec.channels * spec.duration_steps);

  double lx = 0.0;
  double ly = 0.0;
  for (std::size_t t = 0; t < spec.duration_steps; ++t) {
    lx += alpha * (noise(rng) - lx);
    ly += alpha * (noise(rng) - ly);
    const Velocity v{lx * gain, ly * gain};
    out.velocity.samples[t] = v;
    for (std::size_t c = 0; c < spec.channels; ++c) {
      const double drive = std::max(0.0, tuning[c][0] + tuning[c][1] * v[0] + tuning[c][2] * v[1]);
      const double rate = spec.rate_scale * drive;
      out.rates[t * spec.channels + c] = rate;
      std::uint64_t n = 0;
      if (rate > 0.0) n = std::poisson_distribution<std::uint64_t>(rate)(sampler);
      out.spikes.at(c, t) = static_cast<std::uint8_t>(std::min<std::uint64_t>(n, 255));
    }
  }
  return out;
}

} // namespace spikedec::synth

#endif
