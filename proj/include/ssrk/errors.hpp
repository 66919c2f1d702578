#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssrk {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent dimensions, malformed tableau or input shapes.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// A parameter lies outside its admissible range.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Fixed-point iteration on an implicit stage failed.
class ConvergenceError : public Error {
 public:
  ConvergenceError(std::size_t stage, double residual, std::size_t step_index = npos)
      : Error(format(stage, residual, step_index)),
        stage_(stage),
        residual_(residual),
        step_index_(step_index) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t stage() const noexcept { return stage_; }
  double residual() const noexcept { return residual_; }
  std::size_t step_index() const noexcept { return step_index_; }

  ConvergenceError at_step(std::size_t step_index) const {
    return ConvergenceError(stage_, residual_, step_index);
  }

 private:
  static std::string format(std::size_t stage, double residual, std::size_t step_index) {
    std::string msg = "stage fixed-point iteration failed: stage " + std::to_string(stage) +
                      ", last residual " + std::to_string(residual);
    if (step_index != npos) msg += ", step " + std::to_string(step_index);
    return msg;
  }

  std::size_t stage_;
  double residual_;
  std::size_t step_index_;
};

// The stage system of a linear problem is singular for the given step.
class SingularityError : public Error {
 public:
  explicit SingularityError(double h)
      : Error("stage matrix I - h A (x) L is singular for h = " + std::to_string(h)), h_(h) {}
  double h() const noexcept { return h_; }

 private:
  double h_;
};

// A Monte Carlo experiment could not produce a trustworthy result.
class ExperimentError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssrk
