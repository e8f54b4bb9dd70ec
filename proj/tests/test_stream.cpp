#include <gtest/gtest.h>

#include <memory>
#include <random>

#include "oracles.hpp"
#include "spikedec/stream.hpp"

using namespace spikedec;
using Sizes = std::vector<std::size_t>;

namespace {

NetworkConfig stack_config(std::size_t first_kernel, std::size_t num_conv, std::size_t channels = 4) {
  NetworkConfig cfg;
  cfg.input_channels = channels;
  for (std::size_t i = 0, k = first_kernel; i < num_conv; ++i, k *= 2) {
    cfg.conv_layers.push_back({2, k, 1});
    cfg.pool_layers.push_back({2, 2});
  }
  cfg.lif_layers = {{4}};
  return cfg;
}

std::shared_ptr<const NetworkModel> shared(NetworkModel m) { return std::make_shared<const NetworkModel>(std::move(m)); }

std::vector<std::size_t> keypoint_bins(const std::vector<StreamEvent>& events) {
  std::vector<std::size_t> out;
  for (const auto& e : events)
    if (e.kind == StreamEvent::Kind::keypoint) out.push_back(e.time_index);
  return out;
}

} // namespace

TEST(RingBuffer, KeepsTrailingColumns) {
  RingBuffer rb(3, 2);
  for (double i = 0; i < 5; ++i) rb.push(std::vector<double>{i, -i});
  EXPECT_EQ(rb.total(), 5u);
  EXPECT_EQ(rb.size(), 3u);
  EXPECT_EQ(rb.column(4)[0], 4.0);
  EXPECT_EQ(rb.column(2)[1], -2.0);
  EXPECT_THROW(rb.column(1), Error);
  EXPECT_THROW(rb.column(5), Error);
  EXPECT_THROW(rb.push(std::vector<double>{1.0}), ShapeError);
}

TEST(StreamInit, Capacities) {
  StreamEngine rt(shared(NetworkModel(stack_config(9, 2))));
  EXPECT_EQ(rt.buffer_capacities(), (Sizes{46, 38, 19, 2}));
  StreamEngine bm(shared(NetworkModel(stack_config(31, 3))));
  EXPECT_EQ(bm.buffer_capacities(), (Sizes{652, 622, 311, 250, 125, 2}));

  NetworkConfig id;
  id.input_channels = 1;
  id.conv_layers = {{1, 1, 1}};
  id.pool_layers = {{1, 1}};
  id.lif_layers = {{1}};
  StreamEngine ident(shared(NetworkModel(id)));
  EXPECT_EQ(ident.buffer_capacities(), (Sizes{1, 1}));
  for (auto f : ident.buffer_fill()) EXPECT_EQ(f, 0u);
}

TEST(PushBin, RtnetWarmupThenEveryFourthBin) {
  std::mt19937_64 rng(1);
  StreamEngine eng(shared(NetworkModel::random(stack_config(9, 2), 1)));
  const auto spikes = oracle::random_spikes(rng, 4, 46 + 4 * 6);
  for (std::size_t t = 0; t < spikes.steps(); ++t) {
    const auto ev = eng.push_bin(spikes.bin(t));
    const std::size_t bin = t + 1; // 1-based
    if (bin < 46) {
      ASSERT_EQ(ev.size(), 1u);
      EXPECT_EQ(ev[0].kind, StreamEvent::Kind::warmup);
      EXPECT_FALSE(ev[0].payload.has_value());
    } else if ((bin - 46) % 4 == 0) {
      ASSERT_EQ(ev.size(), 5u) << bin;
      EXPECT_EQ(ev[0].kind, StreamEvent::Kind::keypoint);
      for (std::size_t j = 1; j < 5; ++j) EXPECT_EQ(ev[j].kind, StreamEvent::Kind::velocity_sample);
    } else {
      EXPECT_TRUE(ev.empty()) << bin;
    }
  }
  EXPECT_EQ(eng.keypoints_emitted(), 7u);
}

TEST(PushBin, HoldZeroWarmupPolicy) {
  auto cfg = stack_config(9, 2);
  cfg.warmup_policy = WarmupPolicy::hold_zero;
  StreamEngine eng(shared(NetworkModel(cfg)));
  const std::vector<std::uint8_t> bin(4, 1);
  const auto ev = eng.push_bin(bin);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].payload, (Velocity{0, 0}));
}

TEST(PushBin, ChannelMismatch) {
  StreamEngine eng(shared(NetworkModel(stack_config(9, 2))));
  const std::vector<std::uint8_t> bin(5, 0);
  EXPECT_THROW(eng.push_bin(bin), ShapeError);
}

TEST(PushBin, ZeroWeightModelEmitsZeros) {
  std::mt19937_64 rng(2);
  const auto res = run_stream(shared(NetworkModel(stack_config(9, 2))), oracle::random_spikes(rng, 4, 120));
  ASSERT_FALSE(res.trajectory.samples.empty());
  for (const auto& v : res.trajectory.samples) EXPECT_EQ(v, (Velocity{0, 0}));
}

TEST(PushBin, TimeIndicesIncreasePerKind) {
  std::mt19937_64 rng(3);
  const auto res = run_stream(shared(NetworkModel::random(stack_config(5, 2), 2)), oracle::random_spikes(rng, 4, 90));
  std::map<StreamEvent::Kind, long long> last;
  for (const auto& e : res.events) {
    auto it = last.find(e.kind);
    if (it != last.end()) {
      EXPECT_GT(static_cast<long long>(e.time_index), it->second);
    }
    last[e.kind] = static_cast<long long>(e.time_index);
  }
}

TEST(RunStream, KeypointCounts) {
  std::mt19937_64 rng(4);
  const auto model = shared(NetworkModel::random(stack_config(9, 2), 3));
  const auto one = run_stream(model, oracle::random_spikes(rng, 4, 46));
  EXPECT_EQ(one.keypoints.size(), 1u);
  EXPECT_EQ(one.trajectory.size(), 4u);
  for (std::size_t m = 0; m < 6; ++m) {
    const auto res = run_stream(model, oracle::random_spikes(rng, 4, 46 + 4 * m));
    EXPECT_EQ(res.keypoints.size(), 1 + m);
  }
  const auto empty = run_stream(model, SpikeStream(4, 0));
  EXPECT_TRUE(empty.trajectory.samples.empty());
  EXPECT_EQ(empty.timing.pushes, 0u);
}

TEST(RunStream, TimestampsCarryLatency) {
  std::mt19937_64 rng(5);
  const auto model = shared(NetworkModel::random(stack_config(9, 2), 4));
  const auto res = run_stream(model, oracle::random_spikes(rng, 4, 60));
  // First keypoint completes at bin 45 (ends at 184 ms); 24 latency steps.
  const auto kp = std::find_if(res.events.begin(), res.events.end(),
                               [](const StreamEvent& e) { return e.kind == StreamEvent::Kind::keypoint; });
  ASSERT_NE(kp, res.events.end());
  EXPECT_EQ(kp->time_index, 45u);
  EXPECT_DOUBLE_EQ(kp->t_ms, 184.0 - 96.0);
  EXPECT_DOUBLE_EQ(res.trajectory.time_ms(3), kp->t_ms);
}

TEST(RunStream, ChunkedEqualsConcatenated) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cfg = oracle::random_config(rng, trial % 2 == 0);
    const auto model = shared(NetworkModel::random(cfg, trial));
    const auto spikes = oracle::random_spikes(rng, cfg.input_channels, oracle::steps_past_rf(cfg, 60));
    const std::size_t cut = 1 + static_cast<std::size_t>(trial * 7) % (spikes.steps() - 2);
    StreamEngine whole(model), split(model);
    const auto a = run_stream(whole, spikes);
    auto b = run_stream(split, spikes.slice(0, cut));
    const auto c = run_stream(split, spikes.slice(cut, spikes.steps() - cut));
    b.trajectory.samples.insert(b.trajectory.samples.end(), c.trajectory.samples.begin(), c.trajectory.samples.end());
    ASSERT_EQ(a.trajectory.samples, b.trajectory.samples);
    ASSERT_EQ(a.keypoints, c.keypoints);
  }
}

TEST(Equivalence, RandomStacksQuantizedExactFloatClose) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const bool quantized = trial % 2 == 0;
    const auto cfg = oracle::random_config(rng, quantized);
    const auto model = shared(NetworkModel::random(cfg, 1000 + trial));
    const auto plan = bufcalc::make_plan(cfg);
    const std::size_t steps = plan.receptive_field + 3 * plan.interpolation_factor + static_cast<std::size_t>(trial);
    const auto rep = equivalence_report(model, oracle::random_spikes(rng, cfg.input_channels, steps));
    ASSERT_FALSE(rep.empty);
    ASSERT_GE(rep.keypoints_compared, 4u);
    if (quantized)
      ASSERT_EQ(rep.max_abs_diff, 0.0);
    else
      ASSERT_LE(rep.max_rel_diff, 1e-6);
  }
}

TEST(Equivalence, ShortInputIsEmpty) {
  std::mt19937_64 rng(8);
  const auto model = shared(NetworkModel::random(stack_config(9, 2), 1));
  const auto rep = equivalence_report(model, oracle::random_spikes(rng, 4, 45));
  EXPECT_TRUE(rep.empty);
  EXPECT_EQ(rep.samples_compared, 0u);
}

TEST(Incrementality, SteadyStateConvCostMatchesNewDataBuffers) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto cfg = oracle::random_config(rng, false);
    const auto model = shared(NetworkModel::random(cfg, trial));
    const auto plan = bufcalc::make_plan(cfg);
    // Oracle: per keypoint, conv i sees b_new_data columns and so computes
    // (b_new_data - K) / S + 1 new output columns.
    std::uint64_t expect = 0;
    for (std::size_t i = 0; i < cfg.conv_layers.size(); ++i) {
      const auto& c = cfg.conv_layers[i];
      const std::size_t in = i == 0 ? cfg.input_channels : cfg.conv_layers[i - 1].out_channels;
      expect += ((plan.b_new_data[2 * i] - c.kernel) / c.stride + 1) * c.out_channels * in * c.kernel;
    }
    StreamEngine eng(model);
    const auto spikes = oracle::random_spikes(rng, cfg.input_channels, plan.receptive_field + 5 * plan.interpolation_factor);
    std::uint64_t prev = 0;
    std::size_t seen = 0;
    for (std::size_t t = 0; t < spikes.steps(); ++t) {
      const auto ev = eng.push_bin(spikes.bin(t));
      if (!keypoint_bins(ev).empty()) {
        const auto now = eng.ops().conv_multiplies;
        if (seen++ > 0) {
          ASSERT_EQ(now - prev, expect);
        }
        prev = now;
      }
    }
    ASSERT_EQ(seen, 6u);
    ASSERT_EQ(expect, metrics::incremental_conv_multiplies_per_keypoint(*model));
    ASSERT_LE(expect, metrics::naive_conv_multiplies_per_keypoint(*model));
  }
}
