#pragma once

#include <stdexcept>
#include <string>

namespace lddm {

// Error taxonomy shared by all modules. The CLI maps these onto process
// exit codes (usage 2, numerical 3, capacity 4).
struct invalid_argument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Division by a vanishing schedule quantity (gamma_bar = 1, sigma_bar = 0, ...).
struct degenerate_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Enumeration budget exceeded.
struct capacity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw invalid_argument(msg);
}

}  // namespace lddm
