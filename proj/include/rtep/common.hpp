#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace rtep {

using VecX = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Thrown on malformed case files; carries the offending line when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line = -1)
      : std::runtime_error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Thrown when a parsed case violates a model invariant.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a solver fails hard (after the documented retries).
class SolveError : public std::runtime_error {
 public:
  explicit SolveError(const std::string& msg) : std::runtime_error(msg) {}
};

// Verbosity from RTEP_LOG (0 = quiet, 1 = progress, 2 = solver iterations).
inline int log_level() {
  static int level = [] {
    const char* s = std::getenv("RTEP_LOG");
    return s ? std::atoi(s) : 0;
  }();
  return level;
}

template <typename... Args>
void log_msg(int level, const char* fmt, Args... args) {
  if (log_level() >= level) {
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
  }
}

}  // namespace rtep
