#pragma once

#include <stdexcept>
#include <string>

namespace lightcone {

/// Failure categories. The CLI maps these onto process exit codes.
enum class errc {
  parameter,   // argument outside its admissible range
  resolution,  // grid too coarse for the requested object
  shape,       // mismatched grids or dimensions
  config,      // malformed or inconsistent configuration
  model,       // model data violates a structural requirement
  capacity,    // problem exceeds a dense/mode cap
  hypothesis,  // a theorem hypothesis is violated (parity, support, ...)
  divergence,  // integral does not converge
  truncation,  // truncation depth exceeds available modes
  plan,        // PPT plan construction failed
  numerical,   // a numerical tolerance check failed
};

inline const char* to_string(errc code) {
  switch (code) {
    case errc::parameter: return "parameter";
    case errc::resolution: return "resolution";
    case errc::shape: return "shape";
    case errc::config: return "config";
    case errc::model: return "model";
    case errc::capacity: return "capacity";
    case errc::hypothesis: return "hypothesis";
    case errc::divergence: return "divergence";
    case errc::truncation: return "truncation";
    case errc::plan: return "plan";
    case errc::numerical: return "numerical";
  }
  return "unknown";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + " error: " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool condition, errc code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace lightcone
