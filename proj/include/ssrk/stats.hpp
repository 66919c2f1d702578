#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

#include "ssrk/errors.hpp"

namespace ssrk {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  void add(const CompensatedSum& other) noexcept {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;  // from the residuals; 0 for two points
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StructuralError("least_squares: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw DomainError("least_squares: at least two points required");
  CompensatedSum sx, sy;
  for (std::size_t i = 0; i < n; ++i) {
    sx.add(x[i]);
    sy.add(y[i]);
  }
  const double mx = sx.value() / static_cast<double>(n);
  const double my = sy.value() / static_cast<double>(n);
  CompensatedSum sxx, sxy;
  for (std::size_t i = 0; i < n; ++i) {
    sxx.add((x[i] - mx) * (x[i] - mx));
    sxy.add((x[i] - mx) * (y[i] - my));
  }
  if (!(sxx.value() > 0.0)) throw DomainError("least_squares: abscissae are all equal");
  LinearFit fit;
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    CompensatedSum ssr;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      ssr.add(r * r);
    }
    fit.slope_stderr = std::sqrt(ssr.value() / static_cast<double>(n - 2) / sxx.value());
  }
  return fit;
}

/// Least-squares slope weights w_i = (x_i - mean x) / Sxx, so slope = sum_i w_i y_i.
inline std::vector<double> slope_weights(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw DomainError("slope_weights: at least two points required");
  CompensatedSum sx;
  for (double v : x) sx.add(v);
  const double mx = sx.value() / static_cast<double>(n);
  CompensatedSum sxx;
  for (double v : x) sxx.add((v - mx) * (v - mx));
  if (!(sxx.value() > 0.0)) throw DomainError("slope_weights: abscissae are all equal");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = (x[i] - mx) / sxx.value();
  return w;
}

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Paths are grouped into fixed blocks of this size; blocks are reduced in index order,
/// so results do not depend on the number of worker threads.
inline constexpr std::size_t kPathBlock = 64;

/**
 * Runs fn(block_index, first, last) for every block of [0, n) with up to `threads`
 * workers pulling blocks in order. The first exception thrown by any block is rethrown.
 */
template <class Fn>
void for_each_block(std::size_t n, std::size_t threads, Fn&& fn) {
  const std::size_t blocks = (n + kPathBlock - 1) / kPathBlock;
  auto run = [&](std::size_t b) { fn(b, b * kPathBlock, std::min(n, (b + 1) * kPathBlock)); };
  threads = std::min(resolve_threads(threads), std::max<std::size_t>(blocks, 1));
  if (threads <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run(b);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < blocks; b += threads) run(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace ssrk
