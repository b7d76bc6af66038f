#pragma once
#include <stdexcept>
#include <cmath>
#include <string>

namespace vmstab {

constexpr double kPi = 3.14159265358979323846;

// Failures carry the module that raised them so the CLI can attribute them.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}
  const std::string& module() const { return module_; }

 private:
  std::string module_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

inline double momentum_factor(double vr, double vt) { return std::sqrt(1.0 + vr * vr + vt * vt); }

}  // namespace vmstab
