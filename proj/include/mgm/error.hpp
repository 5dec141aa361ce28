#pragma once

#include <stdexcept>
#include <string>

namespace mgm {

// Shape disagreement between operands (matmul inner dims, elementwise ops, ...).
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// A scalar argument outside its legal range (temperature <= 0, r outside [0,1], ...).
struct InvalidParameterError : std::invalid_argument {
  explicit InvalidParameterError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Token / label / target index outside its table.
struct IndexError : std::out_of_range {
  explicit IndexError(const std::string& msg) : std::out_of_range(msg) {}
};

// Caller broke an API precondition (backward on non-scalar, empty batch, ...).
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Malformed persisted data: bad magic, unsupported version, failed CRC.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures, always carrying the offending path.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration (unknown key, unparsable value, invalid combination).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mgm
