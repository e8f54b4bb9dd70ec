#ifndef SPIKEDEC_CONFIG_HPP
#define SPIKEDEC_CONFIG_HPP

// Network description and its JSON config file.
//
// Config keys (all at top level unless nested as shown):
//
//   input_channels   integer, channels per spike bin (96 or 192 for M1 / M1+S1)
//   step_ms          real, bin width in milliseconds (default 4.0)
//   seq_len_train    integer, training sequence length, metadata only
//   conv_layers      [{ "out_channels", "kernel", "stride" }, ...]
//   pool_layers      [{ "kernel", "stride" }, ...], one per conv layer
//   conv_activation  "none" | "relu", applied between each conv and its pool
//   lif_layers       [{ "units" }, ...]
//   lif_params       { "beta", "threshold", "reset": "subtract" | "zero" }
//   readout          { "units": 2, "beta", "source": "spikes" | "membrane" }
//   weight_format    "float" or "s-i-f", e.g. "1-1-7"
//   buffer_format    "float" or "s-i-f", e.g. "1-1-4"
//   warmup_policy    "silent" | "hold_zero"

#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikedec/error.hpp"
#include "spikedec/fxp.hpp"

namespace spikedec {

struct ConvLayerConfig {
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
};

struct PoolLayerConfig {
  std::size_t kernel = 2;
  std::size_t stride = 2;
};

struct LifLayerConfig {
  std::size_t units = 1;
};

enum class ResetMode { subtract, zero };
enum class Activation { none, relu };
enum class ReadoutSource { spikes, membrane };
enum class WarmupPolicy { silent, hold_zero };

struct LifParams {
  double beta = 0.9;
  double threshold = 1.0;
  ResetMode reset = ResetMode::subtract;
};

struct ReadoutConfig {
  std::size_t units = 2;
  double beta = 0.0;
  ReadoutSource source = ReadoutSource::spikes;
};

inline constexpr std::size_t kMaxInterpolationFactor = 8;

struct NetworkConfig {
  std::size_t input_channels = 96;
  double step_ms = 4.0;
  std::size_t seq_len_train = 0;
  std::vector<ConvLayerConfig> conv_layers;
  std::vector<PoolLayerConfig> pool_layers;
  Activation conv_activation = Activation::none;
  std::vector<LifLayerConfig> lif_layers;
  LifParams lif_params;
  ReadoutConfig readout;
  std::optional<fxp::Format> weight_format;
  std::optional<fxp::Format> buffer_format;
  WarmupPolicy warmup_policy = WarmupPolicy::silent;

  std::size_t interpolation_factor() const {
    std::size_t r = 1;
    for (const auto& c : conv_layers) r *= c.stride;
    for (const auto& p : pool_layers) r *= p.stride;
    return r;
  }

  // Channel count at the output of the conv/pool front-end.
  std::size_t feature_channels() const {
    return conv_layers.empty() ? input_channels : conv_layers.back().out_channels;
  }

  std::size_t last_lif_units() const { return lif_layers.empty() ? feature_channels() : lif_layers.back().units; }

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error("invalid network config: " + msg); };
    if (input_channels == 0) fail("input_channels must be >= 1");
    if (!(step_ms > 0.0)) fail("step_ms must be > 0");
    if (conv_layers.empty()) fail("at least one conv layer is required");
    if (pool_layers.size() != conv_layers.size()) fail("need exactly one pool layer per conv layer");
    for (std::size_t i = 0; i < conv_layers.size(); ++i) {
      const auto& c = conv_layers[i];
      if (c.out_channels == 0 || c.kernel == 0 || c.stride == 0)
        fail("conv layer " + std::to_string(i) + " has a zero size");
      if (i > 0 && c.kernel != 2 * conv_layers[i - 1].kernel)
        fail("conv kernel sizes must double from one layer to the next (layer " + std::to_string(i) + ")");
    }
    for (std::size_t i = 0; i < pool_layers.size(); ++i)
      if (pool_layers[i].kernel == 0 || pool_layers[i].stride == 0)
        fail("pool layer " + std::to_string(i) + " has a zero size");
    if (interpolation_factor() > kMaxInterpolationFactor)
      fail("product of strides is " + std::to_string(interpolation_factor()) + ", supported maximum is 8");
    if (lif_layers.empty()) fail("at least one LIF layer is required");
    for (const auto& l : lif_layers)
      if (l.units == 0) fail("LIF layers need >= 1 unit");
    if (!(lif_params.beta >= 0.0 && lif_params.beta < 1.0)) fail("lif beta must lie in [0, 1)");
    if (!(lif_params.threshold > 0.0)) fail("lif threshold must be > 0");
    if (readout.units != 2) fail("readout must have 2 units (x and y velocity)");
  }
};

namespace detail {

template <typename Enum>
struct EnumName {
  Enum value;
  const char* name;
};

inline constexpr EnumName<ResetMode> kResetNames[] = {{ResetMode::subtract, "subtract"}, {ResetMode::zero, "zero"}};
inline constexpr EnumName<Activation> kActivationNames[] = {{Activation::none, "none"}, {Activation::relu, "relu"}};
inline constexpr EnumName<ReadoutSource> kSourceNames[] = {{ReadoutSource::spikes, "spikes"},
                                                           {ReadoutSource::membrane, "membrane"}};
inline constexpr EnumName<WarmupPolicy> kWarmupNames[] = {{WarmupPolicy::silent, "silent"},
                                                          {WarmupPolicy::hold_zero, "hold_zero"}};

template <typename Enum, std::size_t N>
Enum enum_from(const std::string& text, const EnumName<Enum> (&names)[N], const char* key) {
  for (const auto& n : names)
    if (text == n.name) return n.value;
  throw Error(std::string("unknown value '") + text + "' for config key '" + key + "'");
}

template <typename Enum, std::size_t N>
std::string enum_to(Enum value, const EnumName<Enum> (&names)[N]) {
  for (const auto& n : names)
    if (n.value == value) return n.name;
  return "?";
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config key '") + key + "': " + e.what());
  }
}

template <typename T>
T get_required(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw Error(std::string("config is missing required key '") + key + "'");
  return get_or<T>(j, key, T{});
}

} // namespace detail

inline NetworkConfig config_from_json(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw Error("config root must be an object");
  NetworkConfig cfg;
  cfg.input_channels = get_required<std::size_t>(j, "input_channels");
  cfg.step_ms = get_or<double>(j, "step_ms", 4.0);
  cfg.seq_len_train = get_or<std::size_t>(j, "seq_len_train", 0);
  for (const auto& c : j.value("conv_layers", nlohmann::json::array()))
    cfg.conv_layers.push_back({get_required<std::size_t>(c, "out_channels"), get_required<std::size_t>(c, "kernel"),
                               get_or<std::size_t>(c, "stride", 1)});
  for (const auto& p : j.value("pool_layers", nlohmann::json::array()))
    cfg.pool_layers.push_back({get_or<std::size_t>(p, "kernel", 2), get_or<std::size_t>(p, "stride", 2)});
  cfg.conv_activation = enum_from(get_or<std::string>(j, "conv_activation", "none"), kActivationNames,
                                  "conv_activation");
  for (const auto& l : j.value("lif_layers", nlohmann::json::array()))
    cfg.lif_layers.push_back({get_required<std::size_t>(l, "units")});
  if (j.contains("lif_params")) {
    const auto& lp = j.at("lif_params");
    cfg.lif_params.beta = get_or<double>(lp, "beta", cfg.lif_params.beta);
    cfg.lif_params.threshold = get_or<double>(lp, "threshold", cfg.lif_params.threshold);
    cfg.lif_params.reset = enum_from(get_or<std::string>(lp, "reset", "subtract"), kResetNames, "lif_params.reset");
  }
  if (j.contains("readout")) {
    const auto& ro = j.at("readout");
    cfg.readout.units = get_or<std::size_t>(ro, "units", 2);
    cfg.readout.beta = get_or<double>(ro, "beta", cfg.readout.beta);
    cfg.readout.source = enum_from(get_or<std::string>(ro, "source", "spikes"), kSourceNames, "readout.source");
  }
  cfg.weight_format = fxp::parse_optional(get_or<std::string>(j, "weight_format", "float"));
  cfg.buffer_format = fxp::parse_optional(get_or<std::string>(j, "buffer_format", "float"));
  cfg.warmup_policy = enum_from(get_or<std::string>(j, "warmup_policy", "silent"), kWarmupNames, "warmup_policy");
  cfg.validate();
  return cfg;
}

inline nlohmann::json config_to_json(const NetworkConfig& cfg) {
  using namespace detail;
  nlohmann::json j;
  j["input_channels"] = cfg.input_channels;
  j["step_ms"] = cfg.step_ms;
  j["seq_len_train"] = cfg.seq_len_train;
  j["conv_layers"] = nlohmann::json::array();
  for (const auto& c : cfg.conv_layers)
    j["conv_layers"].push_back({{"out_channels", c.out_channels}, {"kernel", c.kernel}, {"stride", c.stride}});
  j["pool_layers"] = nlohmann::json::array();
  for (const auto& p : cfg.pool_layers) j["pool_layers"].push_back({{"kernel", p.kernel}, {"stride", p.stride}});
  j["conv_activation"] = enum_to(cfg.conv_activation, kActivationNames);
  j["lif_layers"] = nlohmann::json::array();
  for (const auto& l : cfg.lif_layers) j["lif_layers"].push_back({{"units", l.units}});
  j["lif_params"] = {{"beta", cfg.lif_params.beta},
                     {"threshold", cfg.lif_params.threshold},
                     {"reset", enum_to(cfg.lif_params.reset, kResetNames)}};
  j["readout"] = {{"units", cfg.readout.units},
                  {"beta", cfg.readout.beta},
                  {"source", enum_to(cfg.readout.source, kSourceNames)}};
  j["weight_format"] = fxp::to_string(cfg.weight_format);
  j["buffer_format"] = fxp::to_string(cfg.buffer_format);
  j["warmup_policy"] = enum_to(cfg.warmup_policy, kWarmupNames);
  return j;
}

inline NetworkConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const NetworkConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file '" + path + "'");
  out << config_to_json(cfg).dump(2) << "\n";
}

} // namespace spikedec

#endif
