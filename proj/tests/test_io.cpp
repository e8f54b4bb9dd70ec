#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "spikedec/io.hpp"
#include "spikedec/synth.hpp"

using namespace spikedec;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("spikedec_test_" + name)).string();
}

io::CsvIngest parse(const std::string& text) {
  std::istringstream in(text);
  return io::parse_spike_csv(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST(Config, JsonRoundTrip) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto cfg = oracle::random_config(rng, trial % 2 == 0);
    cfg.warmup_policy = trial % 3 == 0 ? WarmupPolicy::hold_zero : WarmupPolicy::silent;
    const auto back = config_from_json(config_to_json(cfg));
    EXPECT_EQ(config_to_json(back), config_to_json(cfg));
  }
}

TEST(Config, DefaultsAndErrors) {
  const auto cfg = config_from_json(nlohmann::json::parse(R"({
    "input_channels": 96,
    "conv_layers": [{"out_channels": 8, "kernel": 9}, {"out_channels": 8, "kernel": 18}],
    "pool_layers": [{}, {}],
    "lif_layers": [{"units": 16}]
  })"));
  EXPECT_DOUBLE_EQ(cfg.step_ms, 4.0);
  EXPECT_EQ(cfg.pool_layers[1].stride, 2u);
  EXPECT_EQ(cfg.interpolation_factor(), 4u);
  EXPECT_FALSE(cfg.weight_format.has_value());
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"conv_layers": []})")), Error);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(
                   R"({"input_channels": 1, "conv_layers": [{"out_channels": 1, "kernel": 3}],
                       "pool_layers": [{}], "lif_layers": [{"units": 1}], "weight_format": "2-1-7"})")),
               FormatError);
  EXPECT_THROW(load_config(temp_path("does_not_exist.json")), Error);
}

TEST(Weights, RoundTripFloatAndFixed) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto cfg = oracle::random_config(rng, trial % 2 == 0);
    const auto m = NetworkModel::random(cfg, trial);
    NetworkModel back(cfg);
    io::decode_weights(back, io::encode_weights(m));
    for (std::size_t i = 0; i < m.parameters().size(); ++i)
      ASSERT_EQ(back.parameters()[i]->values, m.parameters()[i]->values);
    ASSERT_EQ(io::encode_weights(back), io::encode_weights(m));
  }
}

TEST(Weights, FixedPointPayloadIsPacked) {
  NetworkConfig cfg;
  cfg.input_channels = 1;
  cfg.conv_layers = {{1, 1, 1}};
  cfg.pool_layers = {{1, 1}};
  cfg.lif_layers = {{1}};
  cfg.weight_format = fxp::Format(1, 7);
  NetworkModel m(cfg);
  m.parameter("conv0.weight").values = {-2.0};
  m.refresh();
  const auto bytes = io::encode_weights(m);
  // magic + version + name len + "conv0.weight" + dtype + s,i,f + count, then
  // 2 little-endian bytes of raw -256.
  const std::size_t at = 4 + 2 + 2 + 12 + 1 + 3 + 4;
  EXPECT_EQ(static_cast<unsigned char>(bytes[at]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[at + 1]), 0xFF);
}

TEST(Weights, MismatchesAreRejected) {
  std::mt19937_64 rng(3);
  const auto cfg = oracle::random_config(rng, true);
  const auto bytes = io::encode_weights(NetworkModel::random(cfg, 1));

  auto float_cfg = cfg;
  float_cfg.weight_format = std::nullopt;
  NetworkModel wrong_dtype(float_cfg);
  EXPECT_THROW(io::decode_weights(wrong_dtype, bytes), FormatError);

  auto wider = cfg;
  wider.lif_layers[0].units += 1;
  NetworkModel wrong_shape(wider);
  EXPECT_THROW(io::decode_weights(wrong_shape, bytes), FormatError);

  NetworkModel ok(cfg);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 1);
  EXPECT_THROW(io::decode_weights(ok, truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(io::decode_weights(ok, trailing), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(io::decode_weights(ok, bad_magic), FormatError);
}

TEST(Spikes, BinaryRoundTripThroughFile) {
  std::mt19937_64 rng(4);
  auto s = oracle::random_spikes(rng, 7, 333, 255);
  s.bin_ms = 2.5;
  const auto path = temp_path("spikes.snns");
  io::save_spikes(s, path);
  const auto back = io::load_spikes(path);
  EXPECT_EQ(back.channels, 7u);
  EXPECT_EQ(back.counts, s.counts);
  EXPECT_DOUBLE_EQ(back.bin_ms, 2.5);
  EXPECT_EQ(io::encode_spikes(back), io::encode_spikes(s));
  std::filesystem::remove(path);
}

TEST(Spikes, BinaryErrors) {
  SpikeStream s(2, 3);
  auto bytes = io::encode_spikes(s);
  bytes.pop_back();
  EXPECT_THROW(io::decode_spikes(bytes), FormatError);
  bytes = io::encode_spikes(s);
  bytes[1] = 'X';
  EXPECT_THROW(io::decode_spikes(bytes), FormatError);
  EXPECT_THROW(io::load_spikes(temp_path("missing.snns")), Error);
}

TEST(Csv, Examples) {
  const auto zeros = parse("0,0\n0,0\n0,0\n").stream;
  EXPECT_EQ(zeros.channels, 2u);
  EXPECT_EQ(zeros.steps(), 3u);
  for (auto c : zeros.counts) EXPECT_EQ(c, 0);
  EXPECT_DOUBLE_EQ(zeros.bin_ms, 4.0);

  const auto row = parse("0,1,2\n").stream;
  EXPECT_EQ(row.at(0, 0), 0);
  EXPECT_EQ(row.at(1, 0), 1);
  EXPECT_EQ(row.at(2, 0), 2);
}

TEST(Csv, ErrorsNameRowAndColumn) {
  const auto neg = error_of("0,1\n2,-3\n");
  EXPECT_NE(neg.find("row 2"), std::string::npos) << neg;
  EXPECT_NE(neg.find("column 2"), std::string::npos) << neg;
  EXPECT_NE(neg.find("negative"), std::string::npos) << neg;

  const auto frac = error_of("1.5,2\n");
  EXPECT_NE(frac.find("row 1, column 1"), std::string::npos) << frac;
  EXPECT_NE(frac.find("not an integer"), std::string::npos) << frac;

  const auto ragged = error_of("1,2\n3\n");
  EXPECT_NE(ragged.find("row 2"), std::string::npos) << ragged;
  EXPECT_NE(ragged.find("columns"), std::string::npos) << ragged;

  EXPECT_NE(error_of("1,,2\n").find("column 2"), std::string::npos);
}

TEST(Csv, SaturatesLargeCounts) {
  const auto res = parse("300,1\r\n 7 , 256\n");
  EXPECT_EQ(res.saturated_cells, 2u);
  EXPECT_EQ(res.stream.at(0, 0), 255);
  EXPECT_EQ(res.stream.at(0, 1), 7);
}

TEST(Csv, WriteThenParse) {
  std::mt19937_64 rng(5);
  const auto s = oracle::random_spikes(rng, 5, 40, 255);
  std::stringstream buf;
  io::write_spike_csv(s, buf);
  EXPECT_EQ(io::parse_spike_csv(buf).stream.counts, s.counts);
}

TEST(Trajectory, CsvRoundTrip) {
  Trajectory t{76.0, 4.0, {{0.1, -0.2}, {1.0 / 3.0, 2e-9}, {-5, 5}}};
  std::stringstream buf;
  io::write_trajectory_csv(t, buf);
  EXPECT_EQ(buf.str().substr(0, 11), "t_ms,vx,vy\n");
  const auto back = io::parse_trajectory_csv(buf);
  EXPECT_EQ(back.samples, t.samples);
  EXPECT_DOUBLE_EQ(back.start_ms, 76.0);
  EXPECT_DOUBLE_EQ(back.step_ms, 4.0);
}

TEST(Trajectory, RejectsIrregularTimes) {
  std::istringstream bad("t_ms,vx,vy\n0,1,1\n4,1,1\n9,1,1\n");
  EXPECT_THROW(io::parse_trajectory_csv(bad), FormatError);
  std::istringstream header("t,vx,vy\n");
  EXPECT_THROW(io::parse_trajectory_csv(header), FormatError);
}

TEST(Synth, Deterministic) {
  synth::SynthSpec spec;
  spec.channels = 8;
  spec.duration_steps = 500;
  spec.seed = 42;
  const auto a = synth::gen_synth(spec);
  const auto b = synth::gen_synth(spec);
  EXPECT_EQ(a.spikes.counts, b.spikes.counts);
  EXPECT_EQ(a.velocity.samples, b.velocity.samples);
  spec.seed = 43;
  EXPECT_NE(synth::gen_synth(spec).spikes.counts, a.spikes.counts);
}

TEST(Synth, ZeroRateIsSilent) {
  synth::SynthSpec spec;
  spec.channels = 4;
  spec.duration_steps = 1000;
  spec.rate_scale = 0.0;
  for (auto c : synth::gen_synth(spec).spikes.counts) ASSERT_EQ(c, 0);
}

TEST(Synth, MeanCountScalesLinearly) {
  synth::SynthSpec spec;
  spec.channels = 4;
  spec.duration_steps = 100000;
  spec.seed = 7;
  auto mean_count = [&](double scale) {
    spec.rate_scale = scale;
    const auto d = synth::gen_synth(spec);
    double sum = 0.0;
    for (auto c : d.spikes.counts) sum += c;
    return sum / static_cast<double>(d.spikes.counts.size());
  };
  const double base = mean_count(0.1);
  for (double scale : {0.2, 0.5, 1.0}) {
    const double ratio = mean_count(scale) / base;
    EXPECT_NEAR(ratio, scale / 0.1, 0.05 * scale / 0.1) << scale;
  }
}

TEST(Synth, VelocityIsUnitScale) {
  synth::SynthSpec spec;
  spec.channels = 1;
  spec.duration_steps = 200000;
  const auto d = synth::gen_synth(spec);
  double ss = 0.0;
  for (const auto& v : d.velocity.samples) ss += v[0] * v[0];
  const double var = ss / static_cast<double>(d.velocity.size());
  EXPECT_GT(var, 0.7);
  EXPECT_LT(var, 1.3);
}
