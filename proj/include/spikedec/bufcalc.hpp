#ifndef SPIKEDEC_BUFCALC_HPP
#define SPIKEDEC_BUFCALC_HPP

// Buffer-size calculus for streaming a conv/pool stack.
//
// The stack alternates conv and pool layers, so a network with n conv layers
// has 2n "layers" here: index 2k is conv k, index 2k+1 is pool k. Every list in
// a BufferPlan is indexed the same way and describes the *input* buffer of
// that layer.
//
// Two families of functions live here:
//   * receptive_field_and_updates, bsize_keypoints, bsize_new_data_update and
//     bsize_new_data follow the published buffer-size recurrences step by step.
//     They assume conv stride 1 and pool kernel == pool stride.
//   * layer_keypoint_buffers, layer_update_quotas and layer_new_data_buffers
//     derive the same quantities per layer for arbitrary kernels and strides.
//     make_plan uses these, and on stacks the recurrences cover the two agree
//     (checked in make_plan).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "spikedec/config.hpp"
#include "spikedec/error.hpp"

namespace spikedec::bufcalc {

struct StackSpec {
  std::vector<std::size_t> conv_kernels;
  std::vector<std::size_t> conv_strides;
  std::vector<std::size_t> pool_kernels;
  std::vector<std::size_t> pool_strides;
  double step_ms = 4.0;

  std::size_t num_conv() const { return conv_kernels.size(); }
  std::size_t num_layers() const { return 2 * conv_kernels.size(); }

  std::size_t kernel(std::size_t layer) const {
    return layer % 2 == 0 ? conv_kernels[layer / 2] : pool_kernels[layer / 2];
  }
  std::size_t stride(std::size_t layer) const {
    return layer % 2 == 0 ? conv_strides[layer / 2] : pool_strides[layer / 2];
  }

  // Conv stride 1 and pool kernel == pool stride everywhere.
  bool regular() const {
    for (std::size_t i = 0; i < num_conv(); ++i)
      if (conv_strides[i] != 1 || pool_kernels[i] != pool_strides[i]) return false;
    return true;
  }

  void validate() const {
    const std::size_t n = conv_kernels.size();
    if (n == 0) throw Error("stack needs at least one conv layer");
    if (conv_strides.size() != n || pool_kernels.size() != n || pool_strides.size() != n)
      throw Error("stack lists must all have the same length");
    for (std::size_t l = 0; l < num_layers(); ++l)
      if (kernel(l) == 0 || stride(l) == 0) throw Error("stack kernels and strides must be >= 1");
    if (!(step_ms > 0.0)) throw Error("step_ms must be > 0");
  }

  static StackSpec from_config(const NetworkConfig& cfg) {
    StackSpec s;
    for (const auto& c : cfg.conv_layers) {
      s.conv_kernels.push_back(c.kernel);
      s.conv_strides.push_back(c.stride);
    }
    for (const auto& p : cfg.pool_layers) {
      s.pool_kernels.push_back(p.kernel);
      s.pool_strides.push_back(p.stride);
    }
    s.step_ms = cfg.step_ms;
    return s;
  }

  // Doubling conv kernels starting at `first_kernel`, stride-1 convs, pool 2/2.
  static StackSpec doubling(std::size_t first_kernel, std::size_t num_conv, double step_ms = 4.0) {
    StackSpec s;
    s.step_ms = step_ms;
    std::size_t k = first_kernel;
    for (std::size_t i = 0; i < num_conv; ++i, k *= 2) {
      s.conv_kernels.push_back(k);
      s.conv_strides.push_back(1);
      s.pool_kernels.push_back(2);
      s.pool_strides.push_back(2);
    }
    return s;
  }
};

struct ReceptiveFieldTrace {
  std::size_t receptive_field = 1;
  std::vector<std::size_t> r_list;
  std::vector<std::size_t> b_update_list;
};

// Forward sweep over the layers: R grows by (kernel - 1) times the stride
// product seen so far, B_update accumulates that product.
inline ReceptiveFieldTrace receptive_field_and_updates(const StackSpec& spec) {
  spec.validate();
  ReceptiveFieldTrace t;
  std::size_t r = 1;
  std::size_t b_update = 1;
  for (std::size_t i = 0; i < spec.num_layers(); ++i) {
    r = (spec.kernel(i) - 1) * b_update + r;
    b_update = b_update * spec.stride(i);
    t.r_list.push_back(r);
    t.b_update_list.push_back(b_update);
  }
  t.receptive_field = r;
  return t;
}

// Per-layer buffer needed for one keypoint, walking forward from R: even
// entries are conv inputs, odd entries conv outputs, which are then shrunk by
// the pool stride. Throws when the pool division is not exact.
inline std::vector<std::size_t> bsize_keypoints(std::size_t receptive_field, const std::vector<std::size_t>& conv_kernels,
                                                const std::vector<std::size_t>& pool_strides) {
  if (pool_strides.size() != conv_kernels.size()) throw Error("bsize_keypoints: kernel/stride length mismatch");
  std::vector<std::size_t> out;
  long long c = static_cast<long long>(receptive_field);
  for (std::size_t i = 0; i < 2 * conv_kernels.size(); ++i) {
    if (i % 2 == 0) {
      out.push_back(static_cast<std::size_t>(c));
    } else {
      c = c - static_cast<long long>(conv_kernels[i / 2]) + 1;
      if (c < 1) throw Error("bsize_keypoints: receptive field too small for conv kernel " + std::to_string(i / 2));
      out.push_back(static_cast<std::size_t>(c));
      const auto s = static_cast<long long>(pool_strides[i / 2]);
      if (c % s != 0)
        throw Error("bsize_keypoints: buffer " + std::to_string(c) + " is not divisible by pool stride " +
                    std::to_string(s) + " at layer " + std::to_string(i));
      c /= s;
    }
  }
  return out;
}

// Append the last element, reverse, drop the last element.
inline std::vector<std::size_t> bsize_new_data_update(const std::vector<std::size_t>& b_update_list) {
  if (b_update_list.empty()) throw Error("bsize_new_data_update: empty update list");
  std::vector<std::size_t> b(b_update_list);
  b.push_back(b.back());
  std::reverse(b.begin(), b.end());
  b.pop_back();
  return b;
}

// Conv layers need their fresh samples plus kernel - 1 of context; pool
// layers pass the update size through.
inline std::vector<std::size_t> bsize_new_data(const std::vector<std::size_t>& b_new_data_update,
                                               const std::vector<std::size_t>& conv_kernels) {
  if (b_new_data_update.size() != 2 * conv_kernels.size())
    throw Error("bsize_new_data: update list has " + std::to_string(b_new_data_update.size()) + " entries, expected " +
                std::to_string(2 * conv_kernels.size()));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < b_new_data_update.size(); ++i) {
    if (i % 2 == 0)
      out.push_back(b_new_data_update[i] - 1 + conv_kernels[i / 2]);
    else
      out.push_back(b_new_data_update[i]);
  }
  return out;
}

// Minimal input length of each layer such that the stack yields exactly one
// final output.
inline std::vector<std::size_t> layer_keypoint_buffers(const StackSpec& spec) {
  spec.validate();
  std::vector<std::size_t> out(spec.num_layers());
  std::size_t n = 1;
  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    n = (n - 1) * spec.stride(l) + spec.kernel(l);
    out[l] = n;
  }
  return out;
}

// Fresh inputs each layer consumes per additional final output: the product of
// its own stride and all later strides.
inline std::vector<std::size_t> layer_update_quotas(const StackSpec& spec) {
  spec.validate();
  std::vector<std::size_t> out(spec.num_layers());
  std::size_t q = 1;
  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    q *= spec.stride(l);
    out[l] = q;
  }
  return out;
}

// Input window (fresh plus context) covering the new outputs of each layer for
// one additional final output.
inline std::vector<std::size_t> layer_new_data_buffers(const StackSpec& spec) {
  const auto quotas = layer_update_quotas(spec);
  std::vector<std::size_t> out(spec.num_layers());
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t next_quota = l + 1 < spec.num_layers() ? quotas[l + 1] : 1;
    out[l] = (next_quota - 1) * spec.stride(l) + spec.kernel(l);
  }
  return out;
}

struct Latency {
  std::size_t steps = 0;
  double ms = 0.0;
};

// Half of the first layer's keypoint buffer (floored) plus one step.
inline Latency latency(std::size_t first_keypoint_buffer, double step_ms) {
  const std::size_t steps = first_keypoint_buffer / 2 + 1;
  return {steps, static_cast<double>(steps) * step_ms};
}

inline double execution_rate(std::size_t interpolation_factor, double step_ms) {
  if (interpolation_factor == 0) throw Error("interpolation factor must be >= 1");
  return 1000.0 / (static_cast<double>(interpolation_factor) * step_ms);
}

struct BufferPlan {
  StackSpec spec;
  std::size_t receptive_field = 1;
  std::vector<std::size_t> r_list;
  std::vector<std::size_t> b_update_list;
  std::vector<std::size_t> b_keypoints;
  std::vector<std::size_t> b_new_data;
  std::vector<std::size_t> b_new_data_update;
  std::size_t interpolation_factor = 1;
  std::size_t latency_steps = 1;
  double latency_ms = 0.0;
  double execution_rate_hz = 0.0;

  std::size_t num_layers() const { return b_keypoints.size(); }

  // Ring capacity of each layer's input buffer. Equals b_keypoints unless a
  // layer's stride exceeds its kernel.
  std::size_t buffer_capacity(std::size_t layer) const { return std::max(b_keypoints[layer], b_new_data[layer]); }

  // Final outputs produced from an input of `steps` samples.
  std::size_t keypoints_for_length(std::size_t steps) const {
    return steps < receptive_field ? 0 : (steps - receptive_field) / interpolation_factor + 1;
  }

  // 0-based input bin whose arrival completes keypoint `k`.
  std::size_t keypoint_bin(std::size_t k) const { return receptive_field - 1 + k * interpolation_factor; }

  // Timestamp of keypoint k: the end of its completing bin, moved back by the
  // latency.
  double keypoint_time_ms(std::size_t k) const {
    return (static_cast<double>(keypoint_bin(k) + 1) - static_cast<double>(latency_steps)) * spec.step_ms;
  }

  // Timestamp of interpolated sample 0 (keypoint k sits at sample (k+1)*r - 1).
  double trajectory_start_ms() const {
    return keypoint_time_ms(0) - static_cast<double>(interpolation_factor - 1) * spec.step_ms;
  }
};

inline BufferPlan make_plan(const StackSpec& spec) {
  spec.validate();
  BufferPlan p;
  p.spec = spec;
  const auto trace = receptive_field_and_updates(spec);
  p.receptive_field = trace.receptive_field;
  p.r_list = trace.r_list;
  p.b_update_list = trace.b_update_list;
  p.b_keypoints = layer_keypoint_buffers(spec);
  p.b_new_data_update = layer_update_quotas(spec);
  p.b_new_data = layer_new_data_buffers(spec);
  p.interpolation_factor = p.b_new_data_update[0];

  if (p.b_keypoints[0] != p.receptive_field)
    throw Error("internal: keypoint buffer of layer 0 differs from the receptive field");
  if (p.interpolation_factor != trace.b_update_list.back())
    throw Error("internal: interpolation factor differs from the accumulated stride product");

  if (spec.regular()) {
    const bool same_pool_strides =
        std::all_of(spec.pool_strides.begin(), spec.pool_strides.end(),
                    [&](std::size_t s) { return s == spec.pool_strides.front(); });
    if (bsize_keypoints(p.receptive_field, spec.conv_kernels, spec.pool_strides) != p.b_keypoints)
      throw Error("internal: keypoint recurrence disagrees with the per-layer derivation");
    if (same_pool_strides) {
      const auto upd = bsize_new_data_update(trace.b_update_list);
      if (upd != p.b_new_data_update || bsize_new_data(upd, spec.conv_kernels) != p.b_new_data)
        throw Error("internal: new-data recurrences disagree with the per-layer derivation");
    }
  }

  const auto lat = latency(p.b_keypoints[0], spec.step_ms);
  p.latency_steps = lat.steps;
  p.latency_ms = lat.ms;
  p.execution_rate_hz = execution_rate(p.interpolation_factor, spec.step_ms);
  return p;
}

inline BufferPlan make_plan(const NetworkConfig& cfg) { return make_plan(StackSpec::from_config(cfg)); }

struct RealtimeCriteria {
  double max_latency_ms = 100.0;
  double min_rate_hz = 10.0;
};

struct RealtimeVerdict {
  bool capable = false;
  std::vector<std::string> reasons;
};

// Both bounds are inclusive.
inline RealtimeVerdict realtime_check(const BufferPlan& plan, const RealtimeCriteria& criteria = {}) {
  RealtimeVerdict v;
  v.capable = true;
  if (plan.latency_ms > criteria.max_latency_ms) {
    v.capable = false;
    std::ostringstream os;
    os << "latency " << plan.latency_ms << " ms exceeds " << criteria.max_latency_ms << " ms";
    v.reasons.push_back(os.str());
  }
  if (plan.execution_rate_hz < criteria.min_rate_hz) {
    v.capable = false;
    std::ostringstream os;
    os << "execution rate " << plan.execution_rate_hz << " Hz is below " << criteria.min_rate_hz << " Hz";
    v.reasons.push_back(os.str());
  }
  return v;
}

struct SweepRow {
  std::size_t first_kernel = 0;
  std::size_t num_conv = 0;
  std::size_t receptive_field = 0;
  double latency_ms = 0.0;
  double execution_rate_hz = 0.0;
  bool realtime_capable = false;
};

inline std::vector<SweepRow> latency_vs_kernel_sweep(const std::vector<std::size_t>& first_kernels,
                                                     std::size_t num_conv, double step_ms = 4.0) {
  std::vector<SweepRow> rows;
  for (std::size_t k : first_kernels) {
    const auto plan = make_plan(StackSpec::doubling(k, num_conv, step_ms));
    rows.push_back({k, num_conv, plan.receptive_field, plan.latency_ms, plan.execution_rate_hz,
                    realtime_check(plan).capable});
  }
  return rows;
}

} // namespace spikedec::bufcalc

#endif
