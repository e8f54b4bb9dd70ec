#ifndef SPIKEDEC_SIGNAL_HPP
#define SPIKEDEC_SIGNAL_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spikedec/error.hpp"

namespace spikedec {

using Velocity = std::array<double, 2>;

// Multichannel time series, stored time-major so columns append cheaply.
class Signal {
public:
  Signal() = default;
  Signal(std::size_t channels, std::size_t steps, double fill = 0.0)
      : channels_(channels), steps_(steps), data_(channels * steps, fill) {}

  std::size_t channels() const { return channels_; }
  std::size_t steps() const { return steps_; }

  double& at(std::size_t channel, std::size_t step) { return data_[step * channels_ + channel]; }
  double at(std::size_t channel, std::size_t step) const { return data_[step * channels_ + channel]; }

  std::span<const double> column(std::size_t step) const {
    return {data_.data() + step * channels_, channels_};
  }
  std::span<double> column(std::size_t step) { return {data_.data() + step * channels_, channels_}; }

  void push_column(std::span<const double> col) {
    if (col.size() != channels_)
      throw ShapeError("column has " + std::to_string(col.size()) + " entries, signal has " +
                       std::to_string(channels_) + " channels");
    data_.insert(data_.end(), col.begin(), col.end());
    ++steps_;
  }

  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Signal&, const Signal&) = default;

private:
  std::size_t channels_ = 0;
  std::size_t steps_ = 0;
  std::vector<double> data_;
};

// Binned spike counts. counts[t * channels + c] is the count of channel c in bin t.
struct SpikeStream {
  std::size_t channels = 0;
  double bin_ms = 4.0;
  std::vector<std::uint8_t> counts;

  SpikeStream() = default;
  SpikeStream(std::size_t channel_count, std::size_t steps, double bin = 4.0)
      : channels(channel_count), bin_ms(bin), counts(channel_count * steps, 0) {}

  std::size_t steps() const { return channels == 0 ? 0 : counts.size() / channels; }

  std::uint8_t& at(std::size_t channel, std::size_t step) { return counts[step * channels + channel]; }
  std::uint8_t at(std::size_t channel, std::size_t step) const { return counts[step * channels + channel]; }

  std::span<const std::uint8_t> bin(std::size_t step) const { return {counts.data() + step * channels, channels}; }

  void validate() const {
    if (!(bin_ms > 0.0)) throw Error("spike stream bin width must be positive");
    if (channels == 0 && !counts.empty()) throw ShapeError("spike stream has data but zero channels");
    if (channels != 0 && counts.size() % channels != 0) throw ShapeError("spike stream payload is ragged");
  }

  Signal to_signal() const {
    Signal s(channels, steps());
    for (std::size_t i = 0; i < counts.size(); ++i) s.at(i % channels, i / channels) = counts[i];
    return s;
  }

  // Bins [first, first + count).
  SpikeStream slice(std::size_t first, std::size_t count) const {
    SpikeStream out(channels, count, bin_ms);
    std::copy(counts.begin() + static_cast<std::ptrdiff_t>(first * channels),
              counts.begin() + static_cast<std::ptrdiff_t>((first + count) * channels), out.counts.begin());
    return out;
  }

  friend bool operator==(const SpikeStream&, const SpikeStream&) = default;
};

// 2-D velocity samples on a uniform time grid.
struct Trajectory {
  double start_ms = 0.0;
  double step_ms = 4.0;
  std::vector<Velocity> samples;

  std::size_t size() const { return samples.size(); }
  double time_ms(std::size_t i) const { return start_ms + static_cast<double>(i) * step_ms; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

} // namespace spikedec

#endif
