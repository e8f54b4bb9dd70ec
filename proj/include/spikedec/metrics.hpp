#ifndef SPIKEDEC_METRICS_HPP
#define SPIKEDEC_METRICS_HPP

// Accuracy and resource metrics.
//
// Operation counting convention (version 1):
//   * conv: one MAC per weight/input product with both operands nonzero
//   * pooling: one AC per nonzero input added, one MAC per output whose sum is
//     nonzero (the division by the kernel size); kernel-1 pools are free
//   * LIF input: MAC when the input is real valued (first LIF layer), AC when
//     it is a spike; recurrent weights: one AC per presynaptic spike and
//     nonzero weight; leak: one MAC per nonzero membrane when beta != 0
//   * readout: AC per spike (spike source) or MAC per nonzero membrane input,
//     plus one leak MAC per nonzero state when beta != 0
//   * biases and threshold comparisons are not counted

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "spikedec/bufcalc.hpp"
#include "spikedec/error.hpp"
#include "spikedec/model.hpp"
#include "spikedec/signal.hpp"

namespace spikedec::metrics {

inline constexpr int kOpCountingConvention = 1;
inline constexpr double kDefaultLambdaWeights = 1.71e-6;
inline constexpr double kDefaultLambdaSpikes = 2.87e-3;

// Mean over x and y of 1 - SSE/SST.
inline double r2_score(const std::vector<Velocity>& pred, const std::vector<Velocity>& target) {
  if (pred.size() != target.size())
    throw ShapeError("r2_score: prediction has " + std::to_string(pred.size()) + " samples, target has " +
                     std::to_string(target.size()));
  if (target.empty()) throw Error("r2_score: empty target");
  double total = 0.0;
  for (std::size_t d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (const auto& t : target) mean += t[d];
    mean /= static_cast<double>(target.size());
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      sse += (pred[i][d] - target[i][d]) * (pred[i][d] - target[i][d]);
      sst += (target[i][d] - mean) * (target[i][d] - mean);
    }
    if (sst == 0.0) throw Error("r2_score: target dimension " + std::to_string(d) + " has zero variance");
    total += 1.0 - sse / sst;
  }
  return total / 2.0;
}

// Restricts both trajectories to their common timestamps and scores them.
// Fails if the grids differ in step or are not aligned on whole steps.
inline double r2_score(const Trajectory& pred, const Trajectory& target) {
  if (pred.step_ms != target.step_ms) throw Error("r2_score: trajectories use different time steps");
  const double offset = (target.start_ms - pred.start_ms) / pred.step_ms;
  if (std::abs(offset - std::round(offset)) > 1e-9) throw Error("r2_score: trajectory timestamps are not aligned");
  const long long shift = std::llround(offset); // pred index = target index + shift
  std::vector<Velocity> p;
  std::vector<Velocity> t;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const long long j = static_cast<long long>(i) + shift;
    if (j < 0 || j >= static_cast<long long>(pred.size())) continue;
    p.push_back(pred.samples[static_cast<std::size_t>(j)]);
    t.push_back(target.samples[i]);
  }
  if (t.empty()) throw Error("r2_score: trajectories do not overlap");
  return r2_score(p, t);
}

struct OpCounts {
  OpCounter totals;
  std::size_t input_steps = 0;
  std::size_t keypoints = 0;

  double macs_per_step() const { return input_steps ? double(totals.macs()) / double(input_steps) : 0.0; }
  double acs_per_step() const { return input_steps ? double(totals.acs()) / double(input_steps) : 0.0; }
  double macs_per_keypoint() const { return keypoints ? double(totals.macs()) / double(keypoints) : 0.0; }
  double acs_per_keypoint() const { return keypoints ? double(totals.acs()) / double(keypoints) : 0.0; }
};

inline OpCounts count_ops(const NetworkModel& model, const SpikeStream& spikes) {
  OpCounts c;
  const auto res = offline_forward(model, spikes, &c.totals);
  c.input_steps = spikes.steps();
  c.keypoints = res.keypoints.size();
  return c;
}

// Dense conv multiplies the streaming engine performs per keypoint: each conv
// layer computes (b_new_data - kernel) / stride + 1 new columns.
inline std::uint64_t incremental_conv_multiplies_per_keypoint(const NetworkModel& model) {
  const auto plan = bufcalc::make_plan(model.config());
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < model.conv().size(); ++i) {
    const auto& c = model.conv()[i];
    const std::size_t cols = (plan.b_new_data[2 * i] - c.kernel) / c.stride + 1;
    n += cols * c.out_channels * c.in_channels * c.kernel;
  }
  return n;
}

// Dense conv multiplies when every keypoint recomputes each conv layer over
// its whole streaming buffer. Buffers are max(b_keypoints, b_new_data) long;
// the second term only wins when a pool stride exceeds its kernel.
inline std::uint64_t naive_conv_multiplies_per_keypoint(const NetworkModel& model) {
  const auto plan = bufcalc::make_plan(model.config());
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < model.conv().size(); ++i) {
    const auto& c = model.conv()[i];
    const std::size_t cols = (plan.buffer_capacity(2 * i) - c.kernel) / c.stride + 1;
    n += cols * c.out_channels * c.in_channels * c.kernel;
  }
  return n;
}

struct Footprint {
  std::uint64_t bytes = 0;
  std::uint64_t nonzero_bytes = 0;
};

inline std::uint64_t bits_to_bytes(std::uint64_t bits) { return (bits + 7) / 8; }

// Parameters at their stored width (1 + i + f bits fixed point, 32 bits
// float), bit-packed. With include_buffers, adds the streaming ring buffers:
// layer 0 holds u8 spike counts, later layers use the buffer format.
inline Footprint footprint(const NetworkModel& model, bool include_buffers = true) {
  const auto& cfg = model.config();
  const std::uint64_t wbits = cfg.weight_format ? static_cast<std::uint64_t>(cfg.weight_format->total_bits()) : 32;
  std::uint64_t total = 0;
  std::uint64_t nonzero = 0;
  for (const auto* p : model.parameters()) {
    total += p->size() * wbits;
    nonzero += static_cast<std::uint64_t>(std::count_if(p->values.begin(), p->values.end(),
                                                        [](double v) { return v != 0.0; })) *
               wbits;
  }
  std::uint64_t buffer_bits = 0;
  if (include_buffers) {
    const auto plan = bufcalc::make_plan(cfg);
    const std::uint64_t bbits = cfg.buffer_format ? static_cast<std::uint64_t>(cfg.buffer_format->total_bits()) : 32;
    std::size_t channels = cfg.input_channels;
    for (std::size_t l = 0; l < plan.num_layers(); ++l) {
      buffer_bits += plan.buffer_capacity(l) * channels * (l == 0 ? 8 : bbits);
      if (l % 2 == 0) channels = model.conv()[l / 2].out_channels;
    }
  }
  return {bits_to_bytes(total + buffer_bits), bits_to_bytes(nonzero + buffer_bits)};
}

struct Sparsity {
  double connection = 0.0;
  double activation = 1.0;
};

inline double connection_sparsity(const NetworkModel& model) {
  std::size_t zeros = 0;
  std::size_t total = 0;
  for (const auto* p : model.parameters()) {
    total += p->size();
    zeros += static_cast<std::size_t>(std::count(p->values.begin(), p->values.end(), 0.0));
  }
  return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

inline double activation_sparsity(std::uint64_t spikes, std::uint64_t opportunities) {
  return opportunities == 0 ? 1.0 : 1.0 - static_cast<double>(spikes) / static_cast<double>(opportunities);
}

inline Sparsity sparsity(const NetworkModel& model, const SpikeStream& spikes) {
  const auto res = offline_forward(model, spikes);
  return {connection_sparsity(model), activation_sparsity(res.total_spikes, res.spike_opportunities)};
}

// lambda * sum |w| over every parameter.
inline double weight_reg_term(const NetworkModel& model, double lambda_w = kDefaultLambdaWeights) {
  double s = 0.0;
  for (const auto* p : model.parameters())
    for (double v : p->values) s += std::abs(v);
  return lambda_w * s;
}

inline double spike_reg_term(std::uint64_t total_spikes, double lambda_s = kDefaultLambdaSpikes) {
  return lambda_s * static_cast<double>(total_spikes);
}

struct ResourceReport {
  std::uint64_t footprint_bytes = 0;
  std::uint64_t footprint_nonzero_bytes = 0;
  double macs_per_inference_step = 0.0;
  double acs_per_inference_step = 0.0;
  double macs_per_keypoint = 0.0;
  double acs_per_keypoint = 0.0;
  double connection_sparsity = 0.0;
  double activation_sparsity = 1.0;
  double weight_reg = 0.0;
  double spike_reg = 0.0;
};

inline ResourceReport resource_report(const NetworkModel& model, const SpikeStream& spikes) {
  ResourceReport r;
  const auto fp = footprint(model);
  r.footprint_bytes = fp.bytes;
  r.footprint_nonzero_bytes = fp.nonzero_bytes;
  OpCounter ops;
  const auto res = offline_forward(model, spikes, &ops);
  const double steps = static_cast<double>(spikes.steps());
  const double kps = static_cast<double>(res.keypoints.size());
  r.macs_per_inference_step = double(ops.macs()) / steps;
  r.acs_per_inference_step = double(ops.acs()) / steps;
  r.macs_per_keypoint = kps > 0 ? double(ops.macs()) / kps : 0.0;
  r.acs_per_keypoint = kps > 0 ? double(ops.acs()) / kps : 0.0;
  r.connection_sparsity = connection_sparsity(model);
  r.activation_sparsity = activation_sparsity(res.total_spikes, res.spike_opportunities);
  r.weight_reg = weight_reg_term(model);
  r.spike_reg = spike_reg_term(res.total_spikes);
  return r;
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

// Mean and sample standard deviation, e.g. of per-file R^2 values.
inline MeanStd aggregate(const std::vector<double>& values) {
  MeanStd m;
  if (values.empty()) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

} // namespace spikedec::metrics

#endif
