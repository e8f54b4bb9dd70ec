// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"

using namespace spikedec;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

#define REQUIRE(cond, msg)                                                                                             \
  do {                                                                                                                 \
    if (!(cond)) {                                                                                                     \
      std::ostringstream os_;                                                                                          \
      os_ << msg;                                                                                                      \
      return Outcome{false, os_.str()};                                                                                \
    }                                                                                                                  \
  } while (0)

std::string config_path(const char* name) { return std::string(SPIKEDEC_SOURCE_DIR) + "/configs/" + name; }

Outcome buffer_calculus() {
  const auto rt = bufcalc::make_plan(load_config(config_path("rtnet.json")));
  REQUIRE(rt.receptive_field == 46, "rtnet R=" << rt.receptive_field);
  REQUIRE(rt.latency_ms == 96.0, "rtnet latency " << rt.latency_ms);
  REQUIRE(rt.execution_rate_hz == 62.5, "rtnet rate " << rt.execution_rate_hz);
  REQUIRE(bufcalc::realtime_check(rt).capable, "rtnet not capable");
  const auto bm = bufcalc::make_plan(load_config(config_path("bmnet.json")));
  REQUIRE(bm.receptive_field == 652, "bmnet R=" << bm.receptive_field);
  REQUIRE(bm.latency_ms == 1308.0, "bmnet latency " << bm.latency_ms);
  REQUIRE(bm.execution_rate_hz == 31.25, "bmnet rate " << bm.execution_rate_hz);
  REQUIRE(!bufcalc::realtime_check(bm).capable, "bmnet reported capable");
  return {true, "rtnet 46 / 96 ms / 62.5 Hz capable; bmnet 652 / 1308 ms / 31.25 Hz not capable"};
}

Outcome algorithm_oracle() {
  std::mt19937_64 rng(20240601);
  const int n = 250;
  for (int trial = 0; trial < n; ++trial) {
    const auto spec = oracle::random_stack(rng, 4, 32, 4);
    const auto layers = oracle::layers_of(spec);
    const auto plan = bufcalc::make_plan(spec);
    const std::size_t span = *oracle::influence_set(layers).rbegin() + 1;
    REQUIRE(plan.receptive_field == span, "stack " << trial << ": R " << plan.receptive_field << " vs " << span);
    REQUIRE(plan.b_keypoints == oracle::minimal_layer_lengths(layers), "stack " << trial << ": keypoint buffers");
  }
  return {true, std::to_string(n) + " random stacks match brute force"};
}

Outcome streaming_equivalence() {
  std::mt19937_64 rng(777);
  const int n = 120;
  double worst_rel = 0.0;
  for (int trial = 0; trial < n; ++trial) {
    const bool quantized = trial % 2 == 0;
    const auto cfg = oracle::random_config(rng, quantized);
    const auto model = std::make_shared<const NetworkModel>(NetworkModel::random(cfg, 5000 + trial, 1.5));
    const auto plan = bufcalc::make_plan(cfg);
    const std::size_t steps = plan.receptive_field + 3 * plan.interpolation_factor + rng() % 64;
    const auto rep = equivalence_report(model, oracle::random_spikes(rng, cfg.input_channels, steps));
    REQUIRE(!rep.empty && rep.keypoints_compared >= 4, "pair " << trial << ": too few keypoints compared");
    if (quantized)
      REQUIRE(rep.max_abs_diff == 0.0 && rep.exact, "pair " << trial << ": quantized diff " << rep.max_abs_diff);
    else
      REQUIRE(rep.max_rel_diff <= 1e-6, "pair " << trial << ": float rel diff " << rep.max_rel_diff);
    worst_rel = std::max(worst_rel, rep.max_rel_diff);
  }
  std::ostringstream os;
  os << n << " pairs; quantized bit-exact, float max rel diff " << worst_rel;
  return {true, os.str()};
}

Outcome cadence_and_latency() {
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 30; ++trial) {
    auto cfg = oracle::random_config(rng, trial % 2 == 0);
    const auto plan = bufcalc::make_plan(cfg);
    synth::SynthSpec ss;
    ss.channels = cfg.input_channels;
    ss.duration_steps = plan.receptive_field + 10 * plan.interpolation_factor + 3;
    ss.seed = static_cast<std::uint64_t>(trial);
    const auto data = synth::gen_synth(ss);
    StreamEngine eng(std::make_shared<const NetworkModel>(NetworkModel::random(cfg, trial)));
    const std::size_t R = plan.receptive_field;
    const std::size_t q = plan.b_new_data_update[0];
    const std::size_t latency_steps = R / 2 + 1;
    std::size_t seen = 0;
    for (std::size_t t = 0; t < data.spikes.steps(); ++t) {
      const std::size_t bin = t + 1;
      const bool due = bin >= R && (bin - R) % q == 0;
      std::size_t kps = 0;
      for (const auto& e : eng.push_bin(data.spikes.bin(t))) {
        if (e.kind != StreamEvent::Kind::keypoint) continue;
        ++kps;
        const double expect_ms = (static_cast<double>(bin) - static_cast<double>(latency_steps)) * cfg.step_ms;
        REQUIRE(e.t_ms == expect_ms, "stack " << trial << ": keypoint at bin " << bin << " stamped " << e.t_ms
                                              << " ms, expected " << expect_ms);
      }
      REQUIRE(kps == (due ? 1u : 0u), "stack " << trial << ": bin " << bin << " emitted " << kps << " keypoints");
      seen += kps;
    }
    const auto expect = oracle::simulate_lengths(oracle::layers_of(plan.spec), data.spikes.steps()).back();
    REQUIRE(seen == expect, "stack " << trial << ": " << seen << " keypoints, expected " << expect);
    REQUIRE(plan.latency_steps == latency_steps, "stack " << trial << ": latency steps");
  }
  return {true, "30 synthetic streams: first keypoint at bin R, then every b_new_data_update[0] bins"};
}

Outcome incrementality() {
  std::mt19937_64 rng(99);
  const int n = 25;
  for (int trial = 0; trial < n; ++trial) {
    const auto cfg = oracle::random_config(rng, trial % 3 == 0);
    const auto plan = bufcalc::make_plan(cfg);
    std::uint64_t expect = 0;
    for (std::size_t i = 0; i < cfg.conv_layers.size(); ++i) {
      const auto& c = cfg.conv_layers[i];
      const std::size_t in = i == 0 ? cfg.input_channels : cfg.conv_layers[i - 1].out_channels;
      expect += ((plan.b_new_data[2 * i] - c.kernel) / c.stride + 1) * c.out_channels * in * c.kernel;
    }
    StreamEngine eng(std::make_shared<const NetworkModel>(NetworkModel::random(cfg, trial)));
    const auto spikes = oracle::random_spikes(rng, cfg.input_channels, plan.receptive_field + 8 * plan.interpolation_factor);
    std::uint64_t prev = 0;
    std::size_t seen = 0;
    for (std::size_t t = 0; t < spikes.steps(); ++t) {
      bool kp = false;
      for (const auto& e : eng.push_bin(spikes.bin(t))) kp |= e.kind == StreamEvent::Kind::keypoint;
      if (!kp) continue;
      const auto now = eng.ops().conv_multiplies;
      if (seen++ > 0) REQUIRE(now - prev == expect, "stack " << trial << ": " << now - prev << " vs " << expect);
      prev = now;
    }
  }
  return {true, std::to_string(n) + " random stacks: per-keypoint conv multiplies equal the b_new_data count"};
}

Outcome interpolation_error() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi), amp(0.2, 1.0);
  double worst = 0.0;
  for (std::size_t r : {4u, 8u}) {
    for (int trial = 0; trial < 50; ++trial) {
      // Sum of three sinusoids, each with at least 10 keypoints per period.
      std::uniform_real_distribution<double> period(10.0 * static_cast<double>(r), 40.0 * static_cast<double>(r));
      double p[3], a[3], ph[3];
      for (int i = 0; i < 3; ++i) {
        p[i] = period(rng);
        a[i] = amp(rng);
        ph[i] = phase(rng);
      }
      auto f = [&](double t) {
        double v = 0.0;
        for (int i = 0; i < 3; ++i) v += a[i] * std::sin(2.0 * std::numbers::pi * t / p[i] + ph[i]);
        return v;
      };
      const std::size_t k = 60;
      std::vector<Velocity> kps;
      for (std::size_t i = 0; i < k; ++i) {
        const double t = static_cast<double>((i + 1) * r - 1);
        kps.push_back({f(t), f(t + 17.0)});
      }
      const auto out = interpolate_linear(kps, r);
      double err = 0.0, sig = 0.0;
      for (std::size_t t = r - 1; t < out.size(); ++t) {
        const double tt = static_cast<double>(t);
        for (std::size_t d = 0; d < 2; ++d) {
          const double truth = f(tt + (d ? 17.0 : 0.0));
          err += (out[t][d] - truth) * (out[t][d] - truth);
          sig += truth * truth;
        }
      }
      const double rel = std::sqrt(err / sig);
      worst = std::max(worst, rel);
      REQUIRE(rel <= 0.05, "r=" << r << " trial " << trial << ": relative RMS " << rel);
    }
  }
  std::ostringstream os;
  os << "100 band-limited signals, worst relative RMS error " << worst;
  return {true, os.str()};
}

Outcome quantization() {
  std::mt19937_64 rng(5);
  const fxp::Format q17(1, 7), q14(1, 4);
  for (const auto& fmt : {q17, q14}) {
    std::uniform_real_distribution<double> d(fmt.min_value(), fmt.max_value());
    const double bound = std::ldexp(1.0, -fmt.fraction_bits - 1);
    for (int i = 0; i < 100000; ++i) {
      const double x = d(rng);
      const double back = fxp::dequantize(fxp::quantize(x, fmt));
      REQUIRE(std::abs(back - x) <= bound, fmt.to_string() << ": x=" << x);
    }
  }
  double prev = -1e9;
  for (std::int64_t r = q14.min_raw(); r <= q14.max_raw(); ++r) {
    const double v = fxp::dequantize(fxp::Value{r, q14});
    REQUIRE(fxp::quantize(v, q14).raw == r, "idempotence at raw " << r);
    REQUIRE(v > prev, "monotonicity at raw " << r);
    // Every real between two neighbours maps to one of them, in order.
    if (r < q14.max_raw()) {
      const double mid = v + 0.5 * q14.step();
      REQUIRE(fxp::quantize(std::nextafter(mid, -1e9), q14).raw == r, "below midpoint of raw " << r);
      REQUIRE(fxp::quantize(std::nextafter(mid, 1e9), q14).raw == r + 1, "above midpoint of raw " << r);
    }
    prev = v;
  }
  return {true, "2x10^5 round trips within 2^-(f+1); all 64 Q1.4 values idempotent and monotone"};
}

Outcome metrics_sanity() {
  synth::SynthSpec ss;
  ss.channels = 96;
  ss.duration_steps = 2500;
  ss.seed = 11;
  const auto data = synth::gen_synth(ss);
  auto teacher = oracle::teacher_model(96);
  const auto target = oracle::teacher_keypoints(data.spikes);
  const auto out = offline_forward(teacher, data.spikes);
  REQUIRE(out.keypoints.size() == target.size(), "keypoint count " << out.keypoints.size() << " vs " << target.size());
  const double r2 = metrics::r2_score(out.keypoints, target);
  REQUIRE(r2 >= 0.99, "teacher R^2 " << r2);

  // Trajectory-level score against the interpolated target.
  const auto plan = bufcalc::make_plan(teacher.config());
  Trajectory target_traj{plan.trajectory_start_ms(), plan.spec.step_ms, interpolate_linear(target, 4)};
  const double r2_traj = metrics::r2_score(out.trajectory, target_traj);
  REQUIRE(r2_traj >= 0.99, "teacher trajectory R^2 " << r2_traj);

  for (auto* p : teacher.mutable_parameters())
    for (auto& v : p->values) v = 0.0;
  teacher.refresh();
  const auto ops = metrics::count_ops(teacher, data.spikes);
  REQUIRE(ops.totals.macs() == 0 && ops.totals.acs() == 0,
          "zero model counted " << ops.totals.macs() << " MACs, " << ops.totals.acs() << " ACs");
  const double r2_zero = metrics::r2_score(offline_forward(teacher, data.spikes).keypoints, target);
  REQUIRE(r2_zero <= 0.0, "zero model R^2 " << r2_zero);
  std::ostringstream os;
  os << "teacher R^2 " << r2 << " (trajectory " << r2_traj << "); zero model 0 MACs, 0 ACs, R^2 " << r2_zero;
  return {true, os.str()};
}

} // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"buffer calculus reproduction", buffer_calculus},
      {"algorithm oracle equivalence", algorithm_oracle},
      {"streaming equals offline", streaming_equivalence},
      {"emission cadence and latency", cadence_and_latency},
      {"incrementality", incrementality},
      {"interpolation error", interpolation_error},
      {"quantization properties", quantization},
      {"metrics sanity", metrics_sanity},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] criterion %d, %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    failed += o.pass ? 0 : 1;
  }
  std::printf("[SKIP] criterion 9, dataset-scale results: excluded; recorded-data R^2 tables, pretraining gains and "
              "hyperparameter curves need the original recordings and training runs\n");
  std::printf("%d of 8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
