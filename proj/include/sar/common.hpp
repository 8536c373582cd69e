#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sar {

using Shape = std::vector<int64_t>;

// Statistics floor inside sigma = sqrt(var + kEpsStat); keeps constant
// channels finite and gradients bounded.
inline constexpr double kEpsStat = 1e-5;

// Floor added to softplus(raw_gamma) so a generated scale can never
// collapse a channel to zero variance.
inline constexpr double kEpsGamma = 1e-3;

// Raised on malformed run configuration (CLI maps this to exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a run dir / checkpoint / metrics file is absent or corrupt
// (CLI maps this to exit code 3).
struct ArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a requested metric column does not exist (CLI exit code 4).
struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a loss turns non-finite; the trainer writes a diagnostic
// snapshot before throwing.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string shape_str(const Shape& s);

int64_t shape_numel(const Shape& s);

}  // namespace sar
