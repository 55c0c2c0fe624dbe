#pragma once

#include <stdexcept>
#include <string>

namespace cabxde {

// Bad input or configuration (CLI exit code 2). Everything else that throws
// is treated as an internal/numeric failure (exit code 1).
class input_error : public std::runtime_error {
 public:
  explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cabxde
