#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "ssrk/errors.hpp"

namespace ssrk {

/// One Wiener increment pair over a step [t, t + h]:
///   I  = W(t + h) - W(t)
///   I0 = int_t^{t+h} (W(s) - W(t)) ds
struct IncrementPair {
  double I = 0.0;
  double I0 = 0.0;
};

/// Identifier of the random source, recorded in experiment metadata.
inline constexpr std::string_view kNoiseGeneratorId = "mt19937_64(splitmix64(seed))+box-muller";

/// Maps two independent standard normals to the increment pair of a step of size h.
inline IncrementPair increment_from_normals(double h, double u1, double u2) {
  const double sh = std::sqrt(h);
  return {sh * u1, 0.5 * h * sh * (u1 + u2 / std::numbers::sqrt3)};
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Standard normal pairs by the Box-Muller transform: exactly two 64-bit draws per pair.
class NormalPairSource {
 public:
  explicit NormalPairSource(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

  std::pair<double, double> next() {
    // (0, 1]: keeps log finite
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

 private:
  std::mt19937_64 engine_;
};

/**
 * Fine-grid increments for m independent Wiener channels. Storage is channel-major:
 * pair(channel, step) = data[channel * n_fine + step]. Immutable after creation.
 */
class NoisePath {
 public:
  NoisePath(std::size_t m, double h_fine, std::size_t n_fine, std::uint64_t seed,
            std::vector<IncrementPair> data)
      : m_(m), h_fine_(h_fine), n_fine_(n_fine), seed_(seed), data_(std::move(data)) {
    if (m_ < 1) throw DomainError("noise path needs at least one channel");
    if (!(h_fine_ > 0.0) || !std::isfinite(h_fine_))
      throw DomainError("noise path fine step must be positive");
    if (n_fine_ < 1) throw DomainError("noise path needs at least one step");
    if (data_.size() != m_ * n_fine_)
      throw StructuralError("noise path payload size does not match m * n_fine");
  }

  std::size_t channels() const noexcept { return m_; }
  double h_fine() const noexcept { return h_fine_; }
  std::size_t n_fine() const noexcept { return n_fine_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<IncrementPair>& data() const noexcept { return data_; }

  const IncrementPair& pair(std::size_t channel, std::size_t step) const {
    return data_[channel * n_fine_ + step];
  }

  friend bool operator==(const NoisePath& a, const NoisePath& b) {
    if (a.m_ != b.m_ || a.n_fine_ != b.n_fine_ || a.seed_ != b.seed_ ||
        std::bit_cast<std::uint64_t>(a.h_fine_) != std::bit_cast<std::uint64_t>(b.h_fine_))
      return false;
    for (std::size_t k = 0; k < a.data_.size(); ++k) {
      if (std::bit_cast<std::uint64_t>(a.data_[k].I) != std::bit_cast<std::uint64_t>(b.data_[k].I) ||
          std::bit_cast<std::uint64_t>(a.data_[k].I0) != std::bit_cast<std::uint64_t>(b.data_[k].I0))
        return false;
    }
    return true;
  }

 private:
  std::size_t m_;
  double h_fine_;
  std::size_t n_fine_;
  std::uint64_t seed_;
  std::vector<IncrementPair> data_;
};

/// Draws a path; for each step, channels in order, one normal pair (U1, U2) per channel.
inline NoisePath sample_path(std::size_t m, double h_fine, std::size_t n_fine, std::uint64_t seed) {
  if (!(h_fine > 0.0) || !std::isfinite(h_fine))
    throw DomainError("sample_path: h_fine must be positive, got " + std::to_string(h_fine));
  if (n_fine < 1) throw DomainError("sample_path: n_fine must be at least 1");
  if (m < 1) throw DomainError("sample_path: at least one channel required");
  std::vector<IncrementPair> data(m * n_fine);
  NormalPairSource normals(seed);
  for (std::size_t k = 0; k < n_fine; ++k) {
    for (std::size_t r = 0; r < m; ++r) {
      const auto [u1, u2] = normals.next();
      data[r * n_fine + k] = increment_from_normals(h_fine, u1, u2);
    }
  }
  return NoisePath(m, h_fine, n_fine, seed, std::move(data));
}

/// Increment pair over fine steps [first, first + count) of one channel.
inline IncrementPair aggregate_range(const NoisePath& path, std::size_t channel,
                                     std::size_t first, std::size_t count) {
  if (count == 1) return path.pair(channel, first);
  const double h = path.h_fine();
  double sum_I = 0.0;
  double sum_I0 = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const auto& p = path.pair(channel, first + k);
    sum_I0 += p.I0 + h * sum_I;
    sum_I += p.I;
  }
  return {sum_I, sum_I0};
}

/**
 * Increment pair over coarse step `coarse_step` of size K * h_fine:
 *   I_c  = sum_k I_k
 *   I0_c = sum_k (I0_k + h_fine * sum_{j<k} I_j)
 * which is the exact split of int (W(s) - W(t0)) ds over the fine sub-intervals.
 */
inline IncrementPair aggregate(const NoisePath& path, std::size_t coarse_factor,
                               std::size_t channel, std::size_t coarse_step) {
  if (coarse_factor < 1 || path.n_fine() % coarse_factor != 0)
    throw DomainError("aggregate: coarse factor " + std::to_string(coarse_factor) +
                      " does not divide n_fine = " + std::to_string(path.n_fine()));
  if (channel >= path.channels()) throw DomainError("aggregate: channel index out of range");
  if (coarse_step >= path.n_fine() / coarse_factor)
    throw DomainError("aggregate: coarse step index out of range");
  return aggregate_range(path, channel, coarse_step * coarse_factor, coarse_factor);
}

/// Whole path re-expressed on the grid of step K * h_fine.
inline NoisePath coarsen(const NoisePath& path, std::size_t coarse_factor) {
  if (coarse_factor < 1 || path.n_fine() % coarse_factor != 0)
    throw DomainError("coarsen: coarse factor " + std::to_string(coarse_factor) +
                      " does not divide n_fine = " + std::to_string(path.n_fine()));
  const std::size_t n = path.n_fine() / coarse_factor;
  std::vector<IncrementPair> data(path.channels() * n);
  for (std::size_t r = 0; r < path.channels(); ++r)
    for (std::size_t k = 0; k < n; ++k) data[r * n + k] = aggregate(path, coarse_factor, r, k);
  return NoisePath(path.channels(), path.h_fine() * static_cast<double>(coarse_factor), n,
                   path.seed(), std::move(data));
}

// ---------------------------------------------------------------------------
// Binary dump: little-endian u64 m, f64 h_fine, u64 n_fine, u64 seed, then per channel
// (channel-major) per step the f64 pair (I, I0).

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8))
    throw StructuralError("noise dump: truncated stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace detail

inline void write_binary(const NoisePath& path, std::ostream& out) {
  detail::put_u64(out, path.channels());
  detail::put_f64(out, path.h_fine());
  detail::put_u64(out, path.n_fine());
  detail::put_u64(out, path.seed());
  for (const auto& p : path.data()) {
    detail::put_f64(out, p.I);
    detail::put_f64(out, p.I0);
  }
  if (!out) throw Error("noise dump: write failed");
}

inline NoisePath read_binary(std::istream& in) {
  const auto m = detail::get_u64(in);
  const double h = detail::get_f64(in);
  const auto n = detail::get_u64(in);
  const auto seed = detail::get_u64(in);
  if (m == 0 || n == 0 || m > (std::uint64_t{1} << 32) || n > (std::uint64_t{1} << 40))
    throw StructuralError("noise dump: implausible header");
  std::vector<IncrementPair> data(static_cast<std::size_t>(m * n));
  for (auto& p : data) {
    p.I = detail::get_f64(in);
    p.I0 = detail::get_f64(in);
  }
  return NoisePath(static_cast<std::size_t>(m), h, static_cast<std::size_t>(n), seed, std::move(data));
}

}  // namespace ssrk
