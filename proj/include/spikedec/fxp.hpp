#ifndef SPIKEDEC_FXP_HPP
#define SPIKEDEC_FXP_HPP

// Signed two's-complement fixed-point formats.
//
// A format "s-i-f" stores one sign bit, i integer bits and f fraction bits, so
// the representable range is [-2^i, 2^i - 2^-f] in steps of 2^-f. Rounding is
// to nearest with ties away from zero, and every conversion saturates.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "spikedec/error.hpp"

namespace spikedec::fxp {

struct Format {
  int integer_bits = 1;
  int fraction_bits = 7;

  constexpr Format() = default;
  constexpr Format(int integer, int fraction) : integer_bits(integer), fraction_bits(fraction) {
    if (integer < 0 || fraction < 0 || integer + fraction < 1 || integer + fraction > 62)
      throw FormatError("fixed-point format needs integer_bits, fraction_bits >= 0 and 1 <= sum <= 62");
  }

  constexpr int total_bits() const { return 1 + integer_bits + fraction_bits; }
  constexpr std::int64_t max_raw() const { return (std::int64_t{1} << (integer_bits + fraction_bits)) - 1; }
  constexpr std::int64_t min_raw() const { return -(std::int64_t{1} << (integer_bits + fraction_bits)); }
  double step() const { return std::ldexp(1.0, -fraction_bits); }
  double max_value() const { return std::ldexp(static_cast<double>(max_raw()), -fraction_bits); }
  double min_value() const { return std::ldexp(static_cast<double>(min_raw()), -fraction_bits); }

  std::string to_string() const {
    return "1-" + std::to_string(integer_bits) + "-" + std::to_string(fraction_bits);
  }

  // Parses "s-i-f" with s == 1, e.g. "1-1-7".
  static Format parse(std::string_view text) {
    int fields[3] = {0, 0, 0};
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int k = 0; k < 3; ++k) {
      auto [next, ec] = std::from_chars(p, end, fields[k]);
      if (ec != std::errc{} || next == p)
        throw FormatError("bad fixed-point format '" + std::string(text) + "', expected s-i-f");
      p = next;
      if (k < 2) {
        if (p == end || *p != '-')
          throw FormatError("bad fixed-point format '" + std::string(text) + "', expected s-i-f");
        ++p;
      }
    }
    if (p != end)
      throw FormatError("trailing characters in fixed-point format '" + std::string(text) + "'");
    if (fields[0] != 1)
      throw FormatError("fixed-point formats are signed; sign field must be 1 in '" + std::string(text) + "'");
    return Format(fields[1], fields[2]);
  }

  friend constexpr bool operator==(const Format&, const Format&) = default;
};

// Counts how often a conversion clipped to the format bounds.
struct SaturationCounter {
  std::uint64_t count = 0;
};

struct Value {
  std::int64_t raw = 0;
  Format format{};

  double to_double() const { return std::ldexp(static_cast<double>(raw), -format.fraction_bits); }

  friend bool operator==(const Value&, const Value&) = default;
  // Compares real values, also across formats.
  friend std::partial_ordering operator<=>(const Value& a, const Value& b) {
    return a.to_double() <=> b.to_double();
  }
};

inline std::int64_t saturate(std::int64_t raw, const Format& fmt, SaturationCounter* sat = nullptr) {
  if (raw > fmt.max_raw()) {
    if (sat) ++sat->count;
    return fmt.max_raw();
  }
  if (raw < fmt.min_raw()) {
    if (sat) ++sat->count;
    return fmt.min_raw();
  }
  return raw;
}

// Rounds num / den to the nearest integer, ties away from zero. den > 0.
inline __int128 round_div(__int128 num, __int128 den) {
  const __int128 mag = num < 0 ? -num : num;
  const __int128 q = (2 * mag + den) / (2 * den);
  return num < 0 ? -q : q;
}

inline std::int64_t clamp_to_i64(__int128 v) {
  constexpr __int128 lo = std::numeric_limits<std::int64_t>::min();
  constexpr __int128 hi = std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(v < lo ? lo : (v > hi ? hi : v));
}

// Re-expresses (wide / divisor) * 2^-wide_frac in `fmt`.
inline Value requantize(__int128 wide, int wide_frac, const Format& fmt, SaturationCounter* sat = nullptr,
                        std::int64_t divisor = 1) {
  const int shift = fmt.fraction_bits - wide_frac;
  __int128 num = wide;
  __int128 den = divisor;
  if (shift >= 0)
    num <<= shift;
  else
    den <<= -shift;
  return Value{saturate(clamp_to_i64(round_div(num, den)), fmt, sat), fmt};
}

inline Value quantize(double x, const Format& fmt, SaturationCounter* sat = nullptr) {
  if (!std::isfinite(x))
    throw Error("cannot quantize a non-finite value");
  // Scaling by a power of two is exact, so std::round sees the true value.
  const double scaled = std::round(std::ldexp(x, fmt.fraction_bits));
  if (scaled > static_cast<double>(fmt.max_raw())) {
    if (sat) ++sat->count;
    return Value{fmt.max_raw(), fmt};
  }
  if (scaled < static_cast<double>(fmt.min_raw())) {
    if (sat) ++sat->count;
    return Value{fmt.min_raw(), fmt};
  }
  return Value{static_cast<std::int64_t>(scaled), fmt};
}

inline double dequantize(const Value& v) { return v.to_double(); }

// True when x is exactly a value of `fmt`.
inline bool representable(double x, const Format& fmt) {
  if (!std::isfinite(x)) return false;
  const double scaled = std::ldexp(x, fmt.fraction_bits);
  return scaled == std::floor(scaled) && scaled >= static_cast<double>(fmt.min_raw()) &&
         scaled <= static_cast<double>(fmt.max_raw());
}

// acc + a*b in exact arithmetic, then one rounding step into acc's format.
inline Value mul_acc(const Value& acc, const Value& a, const Value& b, SaturationCounter* sat = nullptr) {
  const int prod_frac = a.format.fraction_bits + b.format.fraction_bits;
  const int frac = std::max(prod_frac, acc.format.fraction_bits);
  const __int128 prod = static_cast<__int128>(a.raw) * b.raw << (frac - prod_frac);
  const __int128 base = static_cast<__int128>(acc.raw) << (frac - acc.format.fraction_bits);
  return requantize(base + prod, frac, acc.format, sat);
}

// Wide accumulator for dot products of raw mantissas sharing one fraction
// width. Only `result` rounds.
class Accumulator {
public:
  explicit Accumulator(int fraction_bits) : frac_(fraction_bits) {}

  int fraction_bits() const { return frac_; }

  void add_raw(std::int64_t raw, int raw_frac) {
    if (raw_frac > frac_)
      throw Error("accumulator cannot absorb a finer fraction width without rounding");
    sum_ += static_cast<__int128>(raw) << (frac_ - raw_frac);
  }

  void add_product(std::int64_t a_raw, std::int64_t b_raw) { sum_ += static_cast<__int128>(a_raw) * b_raw; }

  __int128 sum() const { return sum_; }

  Value result(const Format& fmt, SaturationCounter* sat = nullptr, std::int64_t divisor = 1) const {
    return requantize(sum_, frac_, fmt, sat, divisor);
  }

private:
  int frac_;
  __int128 sum_ = 0;
};

// Parses "float" as nullopt and anything else as a fixed-point format.
inline std::optional<Format> parse_optional(std::string_view text) {
  if (text == "float" || text == "f32") return std::nullopt;
  return Format::parse(text);
}

inline std::string to_string(const std::optional<Format>& fmt) { return fmt ? fmt->to_string() : "float"; }

} // namespace spikedec::fxp

#endif
