#ifndef SPIKEDEC_MODEL_HPP
#define SPIKEDEC_MODEL_HPP

// The hybrid decoder: a temporal conv/pool front-end that compresses the
// spike sequence into keypoints, a stack of recurrent LIF layers stepped once
// per keypoint, a leaky-integrator readout, and linear interpolation back to
// the input rate.
//
// The per-column kernels in this header (conv_column, pool_column, core_step)
// are shared by offline inference and the streaming engine so both paths run
// the same arithmetic in the same order.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spikedec/bufcalc.hpp"
#include "spikedec/config.hpp"
#include "spikedec/error.hpp"
#include "spikedec/fxp.hpp"
#include "spikedec/signal.hpp"

namespace spikedec {

// Operation tallies. "conv_multiplies" counts every multiply the conv kernels
// execute; the mac/ac fields follow the sparse counting convention (an
// operation only counts when both operands are nonzero).
struct OpCounter {
  std::uint64_t conv_multiplies = 0;
  std::uint64_t conv_macs = 0;
  std::uint64_t pool_acs = 0;
  std::uint64_t pool_macs = 0;
  std::uint64_t lif_input_macs = 0;
  std::uint64_t lif_input_acs = 0;
  std::uint64_t lif_recurrent_acs = 0;
  std::uint64_t lif_leak_macs = 0;
  std::uint64_t readout_macs = 0;
  std::uint64_t readout_acs = 0;

  std::uint64_t macs() const { return conv_macs + pool_macs + lif_input_macs + lif_leak_macs + readout_macs; }
  std::uint64_t acs() const { return pool_acs + lif_input_acs + lif_recurrent_acs + readout_acs; }

  OpCounter& operator+=(const OpCounter& o) {
    conv_multiplies += o.conv_multiplies;
    conv_macs += o.conv_macs;
    pool_acs += o.pool_acs;
    pool_macs += o.pool_macs;
    lif_input_macs += o.lif_input_macs;
    lif_input_acs += o.lif_input_acs;
    lif_recurrent_acs += o.lif_recurrent_acs;
    lif_leak_macs += o.lif_leak_macs;
    readout_macs += o.readout_macs;
    readout_acs += o.readout_acs;
    return *this;
  }
};

struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::optional<fxp::Format> format;

  std::size_t size() const { return values.size(); }

  std::size_t expected_size() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  std::int64_t raw(std::size_t i) const {
    return static_cast<std::int64_t>(std::ldexp(values[i], format ? format->fraction_bits : 0));
  }
};

struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  Parameter weight; // out x in x kernel
  Parameter bias;   // out
  std::vector<std::int64_t> weight_raw;
  std::vector<std::int64_t> bias_raw;

  double w(std::size_t o, std::size_t c, std::size_t k) const { return weight.values[(o * in_channels + c) * kernel + k]; }
};

struct PoolLayer {
  std::size_t channels = 0;
  std::size_t kernel = 2;
  std::size_t stride = 2;
};

struct LifLayer {
  std::size_t units = 0;
  std::size_t fan_in = 0;
  Parameter w_in;  // units x fan_in
  Parameter w_rec; // units x units
  Parameter bias;  // units
};

struct ReadoutLayer {
  std::size_t fan_in = 0;
  Parameter weight; // 2 x fan_in
};

// Arithmetic settings for one conv or pool stage.
struct StageNumerics {
  std::optional<fxp::Format> weight_format;
  std::optional<fxp::Format> buffer_format;
  // Fraction width of the stage input; spike counts are integers (0).
  int input_frac = 0;
  Activation activation = Activation::none;

  bool integer_path() const { return weight_format.has_value() && buffer_format.has_value(); }
};

class NetworkModel {
public:
  NetworkModel() = default;

  // All parameters zero.
  explicit NetworkModel(NetworkConfig cfg) : config_(std::move(cfg)) {
    config_.validate();
    std::size_t in = config_.input_channels;
    for (std::size_t i = 0; i < config_.conv_layers.size(); ++i) {
      const auto& c = config_.conv_layers[i];
      ConvLayer layer;
      layer.in_channels = in;
      layer.out_channels = c.out_channels;
      layer.kernel = c.kernel;
      layer.stride = c.stride;
      layer.weight = make_param("conv" + std::to_string(i) + ".weight", {c.out_channels, in, c.kernel});
      layer.bias = make_param("conv" + std::to_string(i) + ".bias", {c.out_channels});
      conv_.push_back(std::move(layer));
      pool_.push_back({c.out_channels, config_.pool_layers[i].kernel, config_.pool_layers[i].stride});
      in = c.out_channels;
    }
    for (std::size_t l = 0; l < config_.lif_layers.size(); ++l) {
      const std::size_t units = config_.lif_layers[l].units;
      LifLayer layer;
      layer.units = units;
      layer.fan_in = in;
      layer.w_in = make_param("lif" + std::to_string(l) + ".w_in", {units, in});
      layer.w_rec = make_param("lif" + std::to_string(l) + ".w_rec", {units, units});
      layer.bias = make_param("lif" + std::to_string(l) + ".bias", {units});
      lif_.push_back(std::move(layer));
      in = units;
    }
    readout_.fan_in = in;
    readout_.weight = make_param("readout.weight", {config_.readout.units, in});
    refresh();
  }

  const NetworkConfig& config() const { return config_; }
  const std::vector<ConvLayer>& conv() const { return conv_; }
  const std::vector<PoolLayer>& pool() const { return pool_; }
  const std::vector<LifLayer>& lif() const { return lif_; }
  const ReadoutLayer& readout() const { return readout_; }

  // Parameters in their serialization order.
  std::vector<const Parameter*> parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& c : conv_) {
      out.push_back(&c.weight);
      out.push_back(&c.bias);
    }
    for (const auto& l : lif_) {
      out.push_back(&l.w_in);
      out.push_back(&l.w_rec);
      out.push_back(&l.bias);
    }
    out.push_back(&readout_.weight);
    return out;
  }

  std::vector<Parameter*> mutable_parameters() {
    std::vector<Parameter*> out;
    for (auto& c : conv_) {
      out.push_back(&c.weight);
      out.push_back(&c.bias);
    }
    for (auto& l : lif_) {
      out.push_back(&l.w_in);
      out.push_back(&l.w_rec);
      out.push_back(&l.bias);
    }
    out.push_back(&readout_.weight);
    return out;
  }

  Parameter& parameter(const std::string& name) {
    for (auto* p : mutable_parameters())
      if (p->name == name) return *p;
    throw Error("model has no parameter named '" + name + "'");
  }

  // Re-checks shapes and representability and rebuilds the raw caches. Call
  // after editing parameter values.
  void refresh() {
    for (auto* p : mutable_parameters()) {
      if (p->values.size() != p->expected_size())
        throw ShapeError("parameter '" + p->name + "' has " + std::to_string(p->values.size()) + " values, expected " +
                         std::to_string(p->expected_size()));
      p->format = config_.weight_format;
      for (double v : p->values) {
        if (!std::isfinite(v)) throw Error("parameter '" + p->name + "' contains a non-finite value");
        if (p->format && !fxp::representable(v, *p->format))
          throw Error("parameter '" + p->name + "' holds " + std::to_string(v) + ", not representable in " +
                      p->format->to_string());
      }
    }
    for (auto& c : conv_) {
      c.weight_raw.assign(c.weight.size(), 0);
      c.bias_raw.assign(c.bias.size(), 0);
      if (config_.weight_format) {
        for (std::size_t i = 0; i < c.weight.size(); ++i) c.weight_raw[i] = c.weight.raw(i);
        for (std::size_t i = 0; i < c.bias.size(); ++i) c.bias_raw[i] = c.bias.raw(i);
      }
    }
  }

  // Rounds every parameter into `fmt` and makes it the model's weight format.
  fxp::SaturationCounter quantize_weights(const fxp::Format& fmt) {
    fxp::SaturationCounter sat;
    config_.weight_format = fmt;
    for (auto* p : mutable_parameters())
      for (double& v : p->values) v = fxp::quantize(v, fmt, &sat).to_double();
    refresh();
    return sat;
  }

  void set_buffer_format(std::optional<fxp::Format> fmt) { config_.buffer_format = fmt; }

  StageNumerics stage_numerics(std::size_t layer) const {
    StageNumerics n;
    n.weight_format = config_.weight_format;
    n.buffer_format = config_.buffer_format;
    n.input_frac = layer == 0 ? 0 : (config_.buffer_format ? config_.buffer_format->fraction_bits : 0);
    n.activation = layer % 2 == 0 ? config_.conv_activation : Activation::none;
    return n;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  // Uniform random parameters, rounded to the weight format or to float32.
  static NetworkModel random(const NetworkConfig& cfg, std::uint64_t seed, double gain = 1.0) {
    NetworkModel m(cfg);
    std::mt19937_64 rng(seed);
    for (auto* p : m.mutable_parameters()) {
      double fan_in = 1.0;
      for (std::size_t d = 1; d < p->shape.size(); ++d) fan_in *= static_cast<double>(p->shape[d]);
      const double scale = gain / std::sqrt(fan_in);
      std::uniform_real_distribution<double> dist(-scale, scale);
      for (double& v : p->values) {
        const double x = dist(rng);
        v = cfg.weight_format ? fxp::quantize(x, *cfg.weight_format).to_double()
                              : static_cast<double>(static_cast<float>(x));
      }
    }
    m.refresh();
    return m;
  }

private:
  static Parameter make_param(std::string name, std::vector<std::size_t> shape) {
    Parameter p;
    p.name = std::move(name);
    p.shape = std::move(shape);
    p.values.assign(p.expected_size(), 0.0);
    return p;
  }

  NetworkConfig config_;
  std::vector<ConvLayer> conv_;
  std::vector<PoolLayer> pool_;
  std::vector<LifLayer> lif_;
  ReadoutLayer readout_;
};

namespace detail {

inline std::int64_t to_raw(double x, int frac) { return static_cast<std::int64_t>(std::ldexp(x, frac)); }

inline double finish_value(double v, const StageNumerics& num, fxp::SaturationCounter* sat) {
  if (num.activation == Activation::relu && v < 0.0) v = 0.0;
  if (num.buffer_format) v = fxp::quantize(v, *num.buffer_format, sat).to_double();
  return v;
}

} // namespace detail

// One output column of a conv layer. `tap(k)` returns the input column at
// kernel offset k. Accumulation order: bias, then channel-major, tap-minor.
template <typename TapFn>
void conv_column(const ConvLayer& layer, const StageNumerics& num, TapFn&& tap, std::span<double> out,
                 OpCounter* ops = nullptr, fxp::SaturationCounter* sat = nullptr) {
  if (out.size() != layer.out_channels) throw ShapeError("conv output column has the wrong size");
  if (ops) ops->conv_multiplies += layer.out_channels * layer.in_channels * layer.kernel;
  if (num.integer_path()) {
    const int wf = num.weight_format->fraction_bits;
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
      fxp::Accumulator acc(wf + num.input_frac);
      acc.add_raw(layer.bias_raw[o], wf);
      for (std::size_t c = 0; c < layer.in_channels; ++c) {
        const std::int64_t* wrow = layer.weight_raw.data() + (o * layer.in_channels + c) * layer.kernel;
        for (std::size_t k = 0; k < layer.kernel; ++k) {
          const double x = tap(k)[c];
          acc.add_product(wrow[k], detail::to_raw(x, num.input_frac));
          if (ops && wrow[k] != 0 && x != 0.0) ++ops->conv_macs;
        }
      }
      fxp::Value v = acc.result(*num.buffer_format, sat);
      if (num.activation == Activation::relu && v.raw < 0) v.raw = 0;
      out[o] = v.to_double();
    }
    return;
  }
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    double acc = layer.bias.values[o];
    for (std::size_t c = 0; c < layer.in_channels; ++c) {
      const double* wrow = layer.weight.values.data() + (o * layer.in_channels + c) * layer.kernel;
      for (std::size_t k = 0; k < layer.kernel; ++k) {
        const double x = tap(k)[c];
        acc += wrow[k] * x;
        if (ops && wrow[k] != 0.0 && x != 0.0) ++ops->conv_macs;
      }
    }
    out[o] = detail::finish_value(acc, num, sat);
  }
}

// One output column of an average pool.
template <typename TapFn>
void pool_column(const PoolLayer& layer, const StageNumerics& num, TapFn&& tap, std::span<double> out,
                 OpCounter* ops = nullptr, fxp::SaturationCounter* sat = nullptr) {
  if (out.size() != layer.channels) throw ShapeError("pool output column has the wrong size");
  // A kernel-1 pool is a copy and costs nothing.
  if (layer.kernel == 1) ops = nullptr;
  for (std::size_t c = 0; c < layer.channels; ++c) {
    if (num.buffer_format) {
      fxp::Accumulator acc(num.input_frac);
      bool any = false;
      for (std::size_t k = 0; k < layer.kernel; ++k) {
        const double x = tap(k)[c];
        acc.add_raw(detail::to_raw(x, num.input_frac), num.input_frac);
        if (x != 0.0) {
          any = true;
          if (ops) ++ops->pool_acs;
        }
      }
      if (ops && any && acc.sum() != 0) ++ops->pool_macs;
      out[c] = acc.result(*num.buffer_format, sat, static_cast<std::int64_t>(layer.kernel)).to_double();
    } else {
      double acc = 0.0;
      for (std::size_t k = 0; k < layer.kernel; ++k) {
        const double x = tap(k)[c];
        acc += x;
        if (ops && x != 0.0) ++ops->pool_acs;
      }
      if (ops && acc != 0.0) ++ops->pool_macs;
      out[c] = acc / static_cast<double>(layer.kernel);
    }
  }
}

enum class PadMode { valid, same };

// Zero padding that makes a stride-s layer produce ceil(T / s) outputs, split
// as evenly as possible with the extra column on the right.
inline std::pair<std::size_t, std::size_t> same_padding(std::size_t steps, std::size_t kernel, std::size_t stride) {
  const std::size_t out = (steps + stride - 1) / stride;
  const std::size_t needed = out == 0 ? 0 : (out - 1) * stride + kernel;
  const std::size_t total = needed > steps ? needed - steps : 0;
  return {total / 2, total - total / 2};
}

inline Signal conv1d_forward(const Signal& input, const ConvLayer& layer, const StageNumerics& num,
                             PadMode mode = PadMode::valid, OpCounter* ops = nullptr,
                             fxp::SaturationCounter* sat = nullptr) {
  if (input.channels() != layer.in_channels)
    throw ShapeError("conv layer expects " + std::to_string(layer.in_channels) + " channels, got " +
                     std::to_string(input.channels()));
  std::size_t left = 0;
  std::size_t padded = input.steps();
  if (mode == PadMode::same) {
    const auto [l, r] = same_padding(input.steps(), layer.kernel, layer.stride);
    left = l;
    padded = input.steps() + l + r;
  } else if (input.steps() < layer.kernel) {
    throw ShapeError("input of length " + std::to_string(input.steps()) + " is shorter than conv kernel " +
                     std::to_string(layer.kernel));
  }
  const std::size_t out_steps = padded < layer.kernel ? 0 : (padded - layer.kernel) / layer.stride + 1;
  const std::vector<double> zeros(input.channels(), 0.0);
  Signal out(layer.out_channels, out_steps);
  for (std::size_t t = 0; t < out_steps; ++t) {
    const std::size_t start = t * layer.stride;
    auto tap = [&](std::size_t k) -> std::span<const double> {
      const std::size_t p = start + k;
      if (p < left || p >= left + input.steps()) return zeros;
      return input.column(p - left);
    };
    conv_column(layer, num, tap, out.column(t), ops, sat);
  }
  return out;
}

inline Signal pool_forward(const Signal& input, const PoolLayer& layer, const StageNumerics& num,
                           OpCounter* ops = nullptr, fxp::SaturationCounter* sat = nullptr) {
  if (input.steps() < layer.kernel)
    throw ShapeError("input of length " + std::to_string(input.steps()) + " is shorter than pool kernel " +
                     std::to_string(layer.kernel));
  if (input.channels() != layer.channels) throw ShapeError("pool layer channel mismatch");
  const std::size_t out_steps = (input.steps() - layer.kernel) / layer.stride + 1;
  Signal out(layer.channels, out_steps);
  for (std::size_t t = 0; t < out_steps; ++t) {
    const std::size_t start = t * layer.stride;
    pool_column(layer, num, [&](std::size_t k) { return input.column(start + k); }, out.column(t), ops, sat);
  }
  return out;
}

// Average pool over plain vectors, for callers without a model.
inline Signal pool_forward(const Signal& input, std::size_t kernel, std::size_t stride) {
  return pool_forward(input, PoolLayer{input.channels(), kernel, stride}, StageNumerics{});
}

struct LifLayerState {
  std::vector<double> membrane;
  std::vector<std::uint8_t> spikes;

  explicit LifLayerState(std::size_t units = 0) : membrane(units, 0.0), spikes(units, 0) {}
};

// v' = beta*v + W_in*x + W_rec*s_prev + b; spike where v' >= threshold, then
// reset. `binary_input` marks x as spikes, which turns input MACs into ACs.
inline const std::vector<std::uint8_t>& lif_step(LifLayerState& state, std::span<const double> input,
                                                 bool binary_input, const LifLayer& layer, const LifParams& params,
                                                 OpCounter* ops = nullptr) {
  if (input.size() != layer.fan_in || state.membrane.size() != layer.units)
    throw ShapeError("LIF layer input or state has the wrong size");
  std::vector<double> next(layer.units);
  for (std::size_t u = 0; u < layer.units; ++u) {
    double v = params.beta * state.membrane[u];
    if (ops && params.beta != 0.0 && state.membrane[u] != 0.0) ++ops->lif_leak_macs;
    const double* win = layer.w_in.values.data() + u * layer.fan_in;
    for (std::size_t i = 0; i < layer.fan_in; ++i) {
      v += win[i] * input[i];
      if (ops && win[i] != 0.0 && input[i] != 0.0) ++(binary_input ? ops->lif_input_acs : ops->lif_input_macs);
    }
    const double* wrec = layer.w_rec.values.data() + u * layer.units;
    for (std::size_t j = 0; j < layer.units; ++j) {
      if (state.spikes[j] == 0) continue;
      v += wrec[j];
      if (ops && wrec[j] != 0.0) ++ops->lif_recurrent_acs;
    }
    v += layer.bias.values[u];
    next[u] = v;
  }
  for (std::size_t u = 0; u < layer.units; ++u) {
    const bool fire = next[u] >= params.threshold;
    state.spikes[u] = fire ? 1 : 0;
    if (fire) next[u] = params.reset == ResetMode::subtract ? next[u] - params.threshold : 0.0;
  }
  state.membrane = std::move(next);
  return state.spikes;
}

// u' = beta_out*u + W*s.
inline Velocity readout_step(Velocity& state, std::span<const double> input, bool binary_input,
                             const ReadoutLayer& layer, double beta_out, OpCounter* ops = nullptr) {
  if (input.size() != layer.fan_in) throw ShapeError("readout input has the wrong size");
  for (std::size_t d = 0; d < 2; ++d) {
    double u = beta_out * state[d];
    if (ops && beta_out != 0.0 && state[d] != 0.0) ++ops->readout_macs;
    const double* w = layer.weight.values.data() + d * layer.fan_in;
    for (std::size_t i = 0; i < layer.fan_in; ++i) {
      if (input[i] == 0.0) continue;
      u += w[i] * input[i];
      if (ops && w[i] != 0.0) ++(binary_input ? ops->readout_acs : ops->readout_macs);
    }
    state[d] = u;
  }
  return state;
}

// Recurrent state carried from one keypoint to the next.
struct CoreState {
  std::vector<LifLayerState> layers;
  Velocity readout{0.0, 0.0};
  std::uint64_t spikes_emitted = 0;
  std::uint64_t spike_opportunities = 0;

  CoreState() = default;
  explicit CoreState(const NetworkModel& model) {
    for (const auto& l : model.lif()) layers.emplace_back(l.units);
  }
};

// One keypoint through the LIF stack and the readout.
inline Velocity core_step(const NetworkModel& model, CoreState& state, std::span<const double> features,
                          OpCounter* ops = nullptr) {
  const auto& cfg = model.config();
  std::vector<double> x(features.begin(), features.end());
  bool binary = false;
  for (std::size_t l = 0; l < model.lif().size(); ++l) {
    const auto& spikes = lif_step(state.layers[l], x, binary, model.lif()[l], cfg.lif_params, ops);
    x.assign(spikes.begin(), spikes.end());
    for (auto s : spikes) state.spikes_emitted += s;
    state.spike_opportunities += spikes.size();
    binary = true;
  }
  if (cfg.readout.source == ReadoutSource::membrane) {
    const auto& mem = state.layers.back().membrane;
    x.assign(mem.begin(), mem.end());
    binary = false;
  }
  return readout_step(state.readout, x, binary, model.readout(), cfg.readout.beta, ops);
}

// The r samples ending at keypoint `current`. Without a previous keypoint the
// segment holds `current`.
inline std::vector<Velocity> interpolate_segment(const Velocity* previous, const Velocity& current, std::size_t r) {
  std::vector<Velocity> out(r, current);
  if (previous == nullptr) return out;
  const double denom = static_cast<double>(r);
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t d = 0; d < 2; ++d)
      out[j][d] = (*previous)[d] + (current[d] - (*previous)[d]) * static_cast<double>(j + 1) / denom;
  return out;
}

// Keypoint i lands on output index (i+1)*r - 1; indices in between are linear
// blends, indices before the first keypoint hold its value.
inline std::vector<Velocity> interpolate_linear(const std::vector<Velocity>& keypoints, std::size_t r) {
  if (r == 0) throw Error("interpolation factor must be >= 1");
  std::vector<Velocity> out;
  out.reserve(keypoints.size() * r);
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    const auto seg = interpolate_segment(i == 0 ? nullptr : &keypoints[i - 1], keypoints[i], r);
    out.insert(out.end(), seg.begin(), seg.end());
  }
  return out;
}

struct OfflineResult {
  std::vector<Velocity> keypoints;
  Trajectory trajectory;
  Signal features;
  std::uint64_t total_spikes = 0;
  std::uint64_t spike_opportunities = 0;
  std::uint64_t saturations = 0;
};

// Whole-sequence inference with valid convolutions, starting from zero state.
inline OfflineResult offline_forward(const NetworkModel& model, const SpikeStream& spikes, OpCounter* ops = nullptr) {
  const auto& cfg = model.config();
  spikes.validate();
  if (spikes.channels != cfg.input_channels)
    throw ShapeError("spike stream has " + std::to_string(spikes.channels) + " channels, model expects " +
                     std::to_string(cfg.input_channels));
  const auto plan = bufcalc::make_plan(cfg);
  if (spikes.steps() < plan.receptive_field)
    throw ShapeError("sequence of " + std::to_string(spikes.steps()) + " bins is shorter than the receptive field " +
                     std::to_string(plan.receptive_field));

  OfflineResult res;
  fxp::SaturationCounter sat;
  Signal x = spikes.to_signal();
  for (std::size_t i = 0; i < model.conv().size(); ++i) {
    x = conv1d_forward(x, model.conv()[i], model.stage_numerics(2 * i), PadMode::valid, ops, &sat);
    x = pool_forward(x, model.pool()[i], model.stage_numerics(2 * i + 1), ops, &sat);
  }
  CoreState state(model);
  for (std::size_t k = 0; k < x.steps(); ++k) res.keypoints.push_back(core_step(model, state, x.column(k), ops));
  res.features = std::move(x);
  res.trajectory.step_ms = cfg.step_ms;
  res.trajectory.start_ms = plan.trajectory_start_ms();
  res.trajectory.samples = interpolate_linear(res.keypoints, plan.interpolation_factor);
  res.total_spikes = state.spikes_emitted;
  res.spike_opportunities = state.spike_opportunities;
  res.saturations = sat.count;
  return res;
}

} // namespace spikedec

#endif
