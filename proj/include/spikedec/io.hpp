#ifndef SPIKEDEC_IO_HPP
#define SPIKEDEC_IO_HPP

// File formats. All binary formats are little-endian.
//
// Weight file (.snnw):
//   "SNNW"  u16 version (1)
//   records, one per parameter in model order, until end of file:
//     u16 name length, UTF-8 name
//     u8 dtype: 0 = f32, 1 = fixed point followed by u8 sign, integer, fraction bits
//     u32 element count
//     payload: f32 values, or raw two's-complement mantissas of
//              ceil((1 + i + f) / 8) bytes each
//
// Spike file (.snns):
//   "SNNS"  u16 version (1)  u32 channels  u32 timesteps  f32 bin_ms
//   timesteps x channels u8 counts, time-major
//
// Spike CSV: one row per bin, one integer column per channel, no header.
// Trajectory CSV: header "t_ms,vx,vy", one row per sample.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spikedec/error.hpp"
#include "spikedec/fxp.hpp"
#include "spikedec/model.hpp"
#include "spikedec/signal.hpp"

namespace spikedec::io {

inline constexpr std::uint16_t kWeightFileVersion = 1;
inline constexpr std::uint16_t kSpikeFileVersion = 1;

namespace detail {

class Writer {
public:
  template <typename T>
  void put(T value) {
    using U = std::make_unsigned_t<std::conditional_t<std::is_floating_point_v<T>, std::uint32_t, T>>;
    U bits;
    if constexpr (std::is_floating_point_v<T>)
      bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
    else
      bits = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  void put_signed(std::int64_t value, std::size_t width) {
    const auto bits = static_cast<std::uint64_t>(value);
    for (std::size_t i = 0; i < width; ++i) bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
  }
  const std::vector<char>& bytes() const { return bytes_; }

private:
  std::vector<char> bytes_;
};

class Reader {
public:
  Reader(std::vector<char> bytes, std::string what) : bytes_(std::move(bytes)), what_(std::move(what)) {}

  static Reader open(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(bytes), path);
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint64_t get_unsigned(std::size_t width) {
    need(width);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += width;
    return v;
  }
  std::int64_t get_signed(std::size_t width) {
    const std::uint64_t v = get_unsigned(width);
    const unsigned shift = static_cast<unsigned>(64 - 8 * width);
    return static_cast<std::int64_t>(v << shift) >> shift;
  }
  std::uint8_t get_u8() { return static_cast<std::uint8_t>(get_unsigned(1)); }
  std::uint16_t get_u16() { return static_cast<std::uint16_t>(get_unsigned(2)); }
  std::uint32_t get_u32() { return static_cast<std::uint32_t>(get_unsigned(4)); }
  float get_f32() { return std::bit_cast<float>(get_u32()); }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("'" + what_ + "' is truncated");
  }

  std::vector<char> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::size_t raw_width(const fxp::Format& fmt) { return static_cast<std::size_t>((fmt.total_bits() + 7) / 8); }

} // namespace detail

inline std::vector<char> encode_weights(const NetworkModel& model) {
  detail::Writer w;
  w.put_bytes("SNNW");
  w.put<std::uint16_t>(kWeightFileVersion);
  for (const auto* p : model.parameters()) {
    if (p->name.size() > 0xFFFF) throw Error("parameter name too long");
    w.put<std::uint16_t>(static_cast<std::uint16_t>(p->name.size()));
    w.put_bytes(p->name);
    if (p->format) {
      w.put<std::uint8_t>(1);
      w.put<std::uint8_t>(1);
      w.put<std::uint8_t>(static_cast<std::uint8_t>(p->format->integer_bits));
      w.put<std::uint8_t>(static_cast<std::uint8_t>(p->format->fraction_bits));
    } else {
      w.put<std::uint8_t>(0);
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->size()));
    for (std::size_t i = 0; i < p->size(); ++i) {
      if (p->format)
        w.put_signed(p->raw(i), detail::raw_width(*p->format));
      else
        w.put<float>(static_cast<float>(p->values[i]));
    }
  }
  return w.bytes();
}

inline void save_weights(const NetworkModel& model, const std::string& path) {
  const auto bytes = encode_weights(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

// Fills `model` from an encoded weight file. Names, order, element counts and
// dtypes must match the model's config.
inline void decode_weights(NetworkModel& model, std::vector<char> bytes, const std::string& what = "weights") {
  detail::Reader r(std::move(bytes), what);
  if (r.get_bytes(4) != "SNNW") throw FormatError("'" + what + "' is not a weight file (bad magic)");
  const auto version = r.get_u16();
  if (version != kWeightFileVersion)
    throw FormatError("'" + what + "' has unsupported weight file version " + std::to_string(version));
  const auto& fmt = model.config().weight_format;
  for (auto* p : model.mutable_parameters()) {
    if (r.at_end()) throw FormatError("'" + what + "' ends before parameter '" + p->name + "'");
    const std::string name = r.get_bytes(r.get_u16());
    if (name != p->name)
      throw FormatError("'" + what + "': expected parameter '" + p->name + "', found '" + name + "'");
    const auto dtype = r.get_u8();
    std::optional<fxp::Format> file_fmt;
    if (dtype == 1) {
      const int s = r.get_u8();
      const int i = r.get_u8();
      const int f = r.get_u8();
      if (s != 1) throw FormatError("'" + what + "': parameter '" + name + "' has a non-signed format");
      file_fmt = fxp::Format(i, f);
    } else if (dtype != 0) {
      throw FormatError("'" + what + "': parameter '" + name + "' has unknown dtype " + std::to_string(dtype));
    }
    if (file_fmt != fmt)
      throw FormatError("'" + what + "': parameter '" + name + "' is stored as " + fxp::to_string(file_fmt) +
                        " but the config declares " + fxp::to_string(fmt));
    const auto count = r.get_u32();
    if (count != p->expected_size())
      throw FormatError("'" + what + "': parameter '" + name + "' has " + std::to_string(count) +
                        " elements, config implies " + std::to_string(p->expected_size()));
    p->values.resize(count);
    for (std::size_t k = 0; k < count; ++k)
      p->values[k] = file_fmt ? std::ldexp(static_cast<double>(r.get_signed(detail::raw_width(*file_fmt))),
                                           -file_fmt->fraction_bits)
                              : static_cast<double>(r.get_f32());
  }
  if (!r.at_end()) throw FormatError("'" + what + "' has trailing data after the last parameter");
  model.refresh();
}

inline NetworkModel load_model(const NetworkConfig& cfg, const std::string& weights_path) {
  NetworkModel model(cfg);
  std::ifstream in(weights_path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file '" + weights_path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  decode_weights(model, std::move(bytes), weights_path);
  return model;
}

inline std::vector<char> encode_spikes(const SpikeStream& s) {
  s.validate();
  detail::Writer w;
  w.put_bytes("SNNS");
  w.put<std::uint16_t>(kSpikeFileVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.steps()));
  w.put<float>(static_cast<float>(s.bin_ms));
  w.put_bytes(std::string_view(reinterpret_cast<const char*>(s.counts.data()), s.counts.size()));
  return w.bytes();
}

inline SpikeStream decode_spikes(std::vector<char> bytes, const std::string& what = "spikes") {
  detail::Reader r(std::move(bytes), what);
  if (r.get_bytes(4) != "SNNS") throw FormatError("'" + what + "' is not a spike file (bad magic)");
  const auto version = r.get_u16();
  if (version != kSpikeFileVersion)
    throw FormatError("'" + what + "' has unsupported spike file version " + std::to_string(version));
  SpikeStream s;
  s.channels = r.get_u32();
  const std::size_t steps = r.get_u32();
  s.bin_ms = r.get_f32();
  if (!(s.bin_ms > 0.0)) throw FormatError("'" + what + "' declares a non-positive bin width");
  const std::size_t n = s.channels * steps;
  if (r.remaining() != n)
    throw FormatError("'" + what + "' payload has " + std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(n));
  const std::string payload = r.get_bytes(n);
  s.counts.assign(payload.begin(), payload.end());
  return s;
}

inline void save_spikes(const SpikeStream& s, const std::string& path) {
  const auto bytes = encode_spikes(s);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline SpikeStream load_spikes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open spike file '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_spikes(std::move(bytes), path);
}

struct CsvIngest {
  SpikeStream stream;
  std::size_t saturated_cells = 0;
};

// Integer CSV, one row per bin. Counts above 255 saturate (reported in
// saturated_cells); negative, non-integer or ragged input is an error.
inline CsvIngest parse_spike_csv(std::istream& in, double bin_ms = 4.0, const std::string& what = "csv") {
  CsvIngest res;
  res.stream.bin_ms = bin_ms;
  std::string line;
  std::size_t row = 0;
  std::size_t channels = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t col = 0;
    std::size_t pos = 0;
    std::vector<std::uint8_t> values;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      std::string_view cell(line.data() + pos, (comma == std::string::npos ? line.size() : comma) - pos);
      ++col;
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      long long v = 0;
      auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      const std::string where = what + ": row " + std::to_string(row) + ", column " + std::to_string(col);
      if (cell.empty() || ec != std::errc{} || end != cell.data() + cell.size())
        throw FormatError(where + ": '" + std::string(cell) + "' is not an integer");
      if (v < 0) throw FormatError(where + ": negative spike count " + std::to_string(v));
      if (v > 255) {
        v = 255;
        ++res.saturated_cells;
      }
      values.push_back(static_cast<std::uint8_t>(v));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (channels == 0)
      channels = values.size();
    else if (values.size() != channels)
      throw FormatError(what + ": row " + std::to_string(row) + " has " + std::to_string(values.size()) +
                        " columns, expected " + std::to_string(channels));
    res.stream.counts.insert(res.stream.counts.end(), values.begin(), values.end());
  }
  res.stream.channels = channels;
  return res;
}

inline CsvIngest ingest_csv(const std::string& path, double bin_ms = 4.0) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file '" + path + "'");
  return parse_spike_csv(in, bin_ms, path);
}

inline void write_spike_csv(const SpikeStream& s, std::ostream& out) {
  for (std::size_t t = 0; t < s.steps(); ++t) {
    for (std::size_t c = 0; c < s.channels; ++c) {
      if (c) out << ',';
      out << static_cast<int>(s.at(c, t));
    }
    out << '\n';
  }
}

// Picks the reader from the extension: ".csv" is CSV, everything else SNNS.
inline SpikeStream load_spike_input(const std::string& path, double csv_bin_ms = 4.0,
                                    std::size_t* saturated = nullptr) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) {
    auto res = ingest_csv(path, csv_bin_ms);
    if (saturated) *saturated = res.saturated_cells;
    return std::move(res.stream);
  }
  return load_spikes(path);
}

inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << "t_ms,vx,vy\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < traj.size(); ++i)
    out << traj.time_ms(i) << ',' << traj.samples[i][0] << ',' << traj.samples[i][1] << '\n';
}

inline void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_trajectory_csv(traj, out);
}

inline Trajectory parse_trajectory_csv(std::istream& in, const std::string& what = "trajectory") {
  Trajectory traj;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(what + ": empty trajectory file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t_ms,vx,vy") throw FormatError(what + ": expected header 't_ms,vx,vy'");
  std::vector<double> times;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    double t = 0.0;
    Velocity v{};
    char c1 = 0;
    char c2 = 0;
    if (!(ls >> t >> c1 >> v[0] >> c2 >> v[1]) || c1 != ',' || c2 != ',')
      throw FormatError(what + ": row " + std::to_string(row) + " is not 't_ms,vx,vy'");
    times.push_back(t);
    traj.samples.push_back(v);
  }
  if (!times.empty()) traj.start_ms = times.front();
  if (times.size() >= 2) {
    traj.step_ms = times[1] - times[0];
    if (!(traj.step_ms > 0.0)) throw FormatError(what + ": timestamps must increase");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (std::abs((times[i] - times[i - 1]) - traj.step_ms) > 1e-6 * traj.step_ms)
        throw FormatError(what + ": timestamps must have a constant stride (row " + std::to_string(i + 2) + ")");
  }
  return traj;
}

inline Trajectory load_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file '" + path + "'");
  return parse_trajectory_csv(in, path);
}

} // namespace spikedec::io

#endif
