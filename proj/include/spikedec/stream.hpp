#ifndef SPIKEDEC_STREAM_HPP
#define SPIKEDEC_STREAM_HPP

// Incremental inference on a live spike stream.
//
// Each conv/pool layer owns a ring buffer holding its most recent input
// columns. Layer l first fires once b_keypoints[l] columns have arrived and
// afterwards every b_new_data_update[l] columns; each firing computes only the
// outputs that became computable, from the trailing b_new_data[l] columns, and
// pushes them to layer l + 1. The last pool layer emits one keypoint per
// firing, which steps the LIF core and releases r_int interpolated samples.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "spikedec/bufcalc.hpp"
#include "spikedec/error.hpp"
#include "spikedec/model.hpp"
#include "spikedec/signal.hpp"

namespace spikedec {

// Fixed-capacity column store addressed by absolute column index.
class RingBuffer {
public:
  RingBuffer(std::size_t capacity, std::size_t channels)
      : capacity_(capacity), channels_(channels), data_(capacity * channels, 0.0) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t channels() const { return channels_; }
  std::size_t total() const { return total_; }
  std::size_t size() const { return std::min(total_, capacity_); }

  void push(std::span<const double> col) {
    if (col.size() != channels_) throw ShapeError("ring buffer column has the wrong size");
    std::copy(col.begin(), col.end(), data_.begin() + static_cast<std::ptrdiff_t>(slot(total_) * channels_));
    ++total_;
  }

  std::span<const double> column(std::size_t index) const {
    if (index >= total_ || total_ - index > capacity_)
      throw Error("ring buffer column " + std::to_string(index) + " is no longer (or not yet) held");
    return {data_.data() + slot(index) * channels_, channels_};
  }

private:
  std::size_t slot(std::size_t index) const { return index % capacity_; }

  std::size_t capacity_;
  std::size_t channels_;
  std::size_t total_ = 0;
  std::vector<double> data_;
};

struct StreamEvent {
  enum class Kind { warmup, keypoint, velocity_sample };

  Kind kind = Kind::warmup;
  // Input bin index for warmup and keypoint events, output sample index for
  // velocity samples.
  std::size_t time_index = 0;
  double t_ms = 0.0;
  std::optional<Velocity> payload;
};

class StreamEngine {
public:
  explicit StreamEngine(std::shared_ptr<const NetworkModel> model)
      : model_(std::move(model)), plan_(bufcalc::make_plan(model_->config())), core_(*model_) {
    std::size_t channels = model_->config().input_channels;
    for (std::size_t l = 0; l < plan_.num_layers(); ++l) {
      layers_.push_back(Stage{RingBuffer(plan_.buffer_capacity(l), channels), 0, plan_.b_keypoints[l],
                              plan_.b_new_data_update[l], model_->stage_numerics(l)});
      channels = l % 2 == 0 ? model_->conv()[l / 2].out_channels : channels;
    }
  }

  const bufcalc::BufferPlan& plan() const { return plan_; }
  const NetworkModel& model() const { return *model_; }
  std::size_t samples_ingested() const { return samples_ingested_; }
  std::size_t keypoints_emitted() const { return keypoints_.size(); }
  const std::vector<Velocity>& keypoints() const { return keypoints_; }
  const OpCounter& ops() const { return ops_; }
  const CoreState& core() const { return core_; }
  std::uint64_t saturations() const { return sat_.count; }

  std::vector<std::size_t> buffer_capacities() const {
    std::vector<std::size_t> out;
    for (const auto& s : layers_) out.push_back(s.ring.capacity());
    return out;
  }
  std::vector<std::size_t> buffer_fill() const {
    std::vector<std::size_t> out;
    for (const auto& s : layers_) out.push_back(s.ring.size());
    return out;
  }

  std::vector<StreamEvent> push_bin(std::span<const std::uint8_t> bin) {
    std::vector<double> col(bin.begin(), bin.end());
    return push_bin(std::span<const double>(col));
  }

  std::vector<StreamEvent> push_bin(std::span<const double> bin) {
    if (bin.size() != model_->config().input_channels)
      throw ShapeError("spike bin has " + std::to_string(bin.size()) + " channels, model expects " +
                       std::to_string(model_->config().input_channels));
    const std::size_t bin_index = samples_ingested_++;
    std::vector<StreamEvent> events;
    layers_[0].ring.push(bin);
    process(0, events);
    if (keypoints_.empty()) {
      StreamEvent ev{StreamEvent::Kind::warmup, bin_index,
                     static_cast<double>(bin_index + 1) * plan_.spec.step_ms, std::nullopt};
      if (model_->config().warmup_policy == WarmupPolicy::hold_zero) ev.payload = Velocity{0.0, 0.0};
      events.push_back(ev);
    }
    return events;
  }

private:
  struct Stage {
    RingBuffer ring;
    std::size_t next_output = 0;
    std::size_t next_trigger = 0;
    std::size_t quota = 1;
    StageNumerics numerics;
  };

  void process(std::size_t l, std::vector<StreamEvent>& events) {
    Stage& st = layers_[l];
    const bool is_conv = l % 2 == 0;
    const std::size_t kernel = plan_.spec.kernel(l);
    const std::size_t stride = plan_.spec.stride(l);
    while (st.ring.total() >= st.next_trigger) {
      st.next_trigger += st.quota;
      const std::size_t out_channels = is_conv ? model_->conv()[l / 2].out_channels : st.ring.channels();
      std::vector<double> out(out_channels);
      std::size_t produced = 0;
      while (st.next_output * stride + kernel <= st.ring.total()) {
        const std::size_t start = st.next_output * stride;
        auto tap = [&](std::size_t k) { return st.ring.column(start + k); };
        if (is_conv)
          conv_column(model_->conv()[l / 2], st.numerics, tap, out, &ops_, &sat_);
        else
          pool_column(model_->pool()[l / 2], st.numerics, tap, out, &ops_, &sat_);
        ++st.next_output;
        ++produced;
        if (l + 1 < layers_.size())
          layers_[l + 1].ring.push(out);
        else
          emit_keypoint(out, events);
      }
      if (produced > 0 && l + 1 < layers_.size()) process(l + 1, events);
    }
  }

  void emit_keypoint(std::span<const double> features, std::vector<StreamEvent>& events) {
    const std::size_t k = keypoints_.size();
    const Velocity v = core_step(*model_, core_, features, &ops_);
    const std::size_t r = plan_.interpolation_factor;
    const auto seg = interpolate_segment(k == 0 ? nullptr : &keypoints_.back(), v, r);
    keypoints_.push_back(v);
    events.push_back({StreamEvent::Kind::keypoint, samples_ingested_ - 1, plan_.keypoint_time_ms(k), v});
    const double start = plan_.trajectory_start_ms();
    for (std::size_t j = 0; j < r; ++j) {
      const std::size_t t = k * r + j;
      events.push_back({StreamEvent::Kind::velocity_sample, t, start + static_cast<double>(t) * plan_.spec.step_ms,
                        seg[j]});
    }
  }

  std::shared_ptr<const NetworkModel> model_;
  bufcalc::BufferPlan plan_;
  std::vector<Stage> layers_;
  CoreState core_;
  std::vector<Velocity> keypoints_;
  std::size_t samples_ingested_ = 0;
  OpCounter ops_;
  fxp::SaturationCounter sat_;
};

struct TimingStats {
  std::size_t pushes = 0;
  double p50_us = 0.0;
  double p90_us = 0.0;
  double p99_us = 0.0;
  double max_us = 0.0;
  double mean_us = 0.0;

  static TimingStats from_samples(std::vector<double> us) {
    TimingStats t;
    t.pushes = us.size();
    if (us.empty()) return t;
    std::sort(us.begin(), us.end());
    auto pct = [&](double p) {
      const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(us.size()))) - 1;
      return us[std::min(idx, us.size() - 1)];
    };
    t.p50_us = pct(0.50);
    t.p90_us = pct(0.90);
    t.p99_us = pct(0.99);
    t.max_us = us.back();
    double sum = 0.0;
    for (double x : us) sum += x;
    t.mean_us = sum / static_cast<double>(us.size());
    return t;
  }
};

struct StreamResult {
  Trajectory trajectory;
  std::vector<Velocity> keypoints;
  std::vector<StreamEvent> events;
  TimingStats timing;
  OpCounter ops;
  std::uint64_t total_spikes = 0;
  std::uint64_t spike_opportunities = 0;
};

inline StreamResult run_stream(StreamEngine& engine, const SpikeStream& spikes) {
  spikes.validate();
  if (spikes.channels != engine.model().config().input_channels && spikes.steps() > 0)
    throw ShapeError("spike stream has " + std::to_string(spikes.channels) + " channels, model expects " +
                     std::to_string(engine.model().config().input_channels));
  StreamResult res;
  std::vector<double> durations;
  durations.reserve(spikes.steps());
  for (std::size_t t = 0; t < spikes.steps(); ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    auto ev = engine.push_bin(spikes.bin(t));
    const auto t1 = std::chrono::steady_clock::now();
    durations.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    for (auto& e : ev) {
      if (e.kind == StreamEvent::Kind::velocity_sample) res.trajectory.samples.push_back(*e.payload);
      res.events.push_back(std::move(e));
    }
  }
  res.trajectory.step_ms = engine.plan().spec.step_ms;
  res.trajectory.start_ms = engine.plan().trajectory_start_ms();
  res.keypoints = engine.keypoints();
  res.timing = TimingStats::from_samples(std::move(durations));
  res.ops = engine.ops();
  res.total_spikes = engine.core().spikes_emitted;
  res.spike_opportunities = engine.core().spike_opportunities;
  return res;
}

inline StreamResult run_stream(std::shared_ptr<const NetworkModel> model, const SpikeStream& spikes) {
  StreamEngine engine(std::move(model));
  return run_stream(engine, spikes);
}

struct EquivalenceReport {
  bool empty = true;
  std::size_t keypoints_compared = 0;
  std::size_t samples_compared = 0;
  double max_abs_diff = 0.0;
  double max_rel_diff = 0.0;
  bool exact = true;
};

// Streaming versus offline inference on the same input. Keypoint k of both
// paths covers input bins [k*r, k*r + R), so the outputs align index by index.
inline EquivalenceReport equivalence_report(std::shared_ptr<const NetworkModel> model, const SpikeStream& spikes) {
  EquivalenceReport rep;
  const auto plan = bufcalc::make_plan(model->config());
  if (spikes.steps() < plan.receptive_field) return rep;
  const auto streamed = run_stream(model, spikes);
  const auto offline = offline_forward(*model, spikes);
  auto compare = [&](const Velocity& a, const Velocity& b) {
    for (std::size_t d = 0; d < 2; ++d) {
      const double diff = std::abs(a[d] - b[d]);
      const double scale = std::max(std::abs(a[d]), std::abs(b[d]));
      rep.max_abs_diff = std::max(rep.max_abs_diff, diff);
      if (scale > 0.0) rep.max_rel_diff = std::max(rep.max_rel_diff, diff / scale);
      if (a[d] != b[d]) rep.exact = false;
    }
  };
  const std::size_t nk = std::min(streamed.keypoints.size(), offline.keypoints.size());
  for (std::size_t k = 0; k < nk; ++k) compare(streamed.keypoints[k], offline.keypoints[k]);
  const std::size_t ns = std::min(streamed.trajectory.size(), offline.trajectory.size());
  for (std::size_t t = 0; t < ns; ++t) compare(streamed.trajectory.samples[t], offline.trajectory.samples[t]);
  if (streamed.keypoints.size() != offline.keypoints.size() || streamed.trajectory.start_ms != offline.trajectory.start_ms)
    rep.exact = false;
  rep.keypoints_compared = nk;
  rep.samples_compared = ns;
  rep.empty = nk == 0;
  return rep;
}

} // namespace spikedec

#endif
