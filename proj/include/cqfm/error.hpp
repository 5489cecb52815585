#ifndef CQFM_ERROR_HPP
#define CQFM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cqfm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_argument"; }
};

class RankDeficient : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "rank_deficient"; }
};

class NotConverged : public Error {
 public:
  NotConverged(const std::string& what, double kkt_residual)
      : Error(what), kkt_residual_(kkt_residual) {}
  double kkt_residual() const noexcept { return kkt_residual_; }
  const char* kind() const noexcept override { return "not_converged"; }

 private:
  double kkt_residual_;
};

/// Malformed input data. Row and column are 1-based file positions, 0 when
/// not applicable.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t row = 0, std::size_t col = 0)
      : Error(what), row_(row), col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }
  const char* kind() const noexcept override { return "data_error"; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// Wraps a failure from one stage of a multi-stage pipeline.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }
  const char* kind() const noexcept override { return "stage_error"; }

 private:
  std::string stage_;
};

}  // namespace cqfm

#endif  // CQFM_ERROR_HPP
