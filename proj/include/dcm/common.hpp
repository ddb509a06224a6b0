#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dcm {

/// Base error for all library failures; `what()` carries the diagnostic.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

class CycleError : public Error {
 public:
  CycleError(const std::string& msg, std::vector<int> cycle_nodes)
      : Error(msg), cycle(std::move(cycle_nodes)) {}
  std::vector<int> cycle;  // 0-based node indices on the cycle
};

class CalibrationError : public Error {
 public:
  explicit CalibrationError(const std::string& msg) : Error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace dcm
