// Streams synthetic spikes through a small quantized network bin by bin and
// prints each keypoint as it is released.
//
//   stream_demo [seconds]

#include <cstdio>
#include <cstdlib>
#include <memory>

#include "spikedec/spikedec.hpp"

using namespace spikedec;

int main(int argc, char** argv) {
  const double seconds = argc > 1 ? std::atof(argv[1]) : 1.0;

  NetworkConfig cfg;
  cfg.input_channels = 96;
  cfg.conv_layers = {{16, 9, 1}, {16, 18, 1}};
  cfg.pool_layers = {{2, 2}, {2, 2}};
  cfg.lif_layers = {{32}};
  cfg.weight_format = fxp::Format(1, 7);
  cfg.buffer_format = fxp::Format(1, 4);

  auto model = std::make_shared<const NetworkModel>(NetworkModel::random(cfg, 7));
  StreamEngine engine(model);
  const auto& plan = engine.plan();
  std::printf("receptive field %zu bins, latency %.0f ms, %.2f keypoints/s\n", plan.receptive_field, plan.latency_ms,
              plan.execution_rate_hz);

  synth::SynthSpec spec;
  spec.duration_steps = static_cast<std::size_t>(seconds * 1000.0 / spec.bin_ms);
  const auto data = synth::gen_synth(spec);

  for (std::size_t t = 0; t < data.spikes.steps(); ++t) {
    for (const auto& ev : engine.push_bin(data.spikes.bin(t))) {
      if (ev.kind != StreamEvent::Kind::keypoint) continue;
      std::printf("bin %4zu  t=%7.1f ms  v=(% .4f, % .4f)\n", ev.time_index, ev.t_ms, (*ev.payload)[0],
                  (*ev.payload)[1]);
    }
  }
  std::printf("%zu keypoints, %llu MACs, %llu ACs, buffer fill %zu/%zu at layer 0\n", engine.keypoints_emitted(),
              static_cast<unsigned long long>(engine.ops().macs()), static_cast<unsigned long long>(engine.ops().acs()),
              engine.buffer_fill()[0], engine.buffer_capacities()[0]);
  return 0;
}
