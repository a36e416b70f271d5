#ifndef ADCGS_ERROR_H_
#define ADCGS_ERROR_H_

#include <stdexcept>
#include <string>

namespace adcgs {

enum class ErrorKind {
  kConfig,     // bad configuration or network width mismatch
  kData,       // malformed dataset / scene spec / input files
  kNumeric,    // NaN loss or other numeric failure
  kDecode,     // bitstream corruption or format mismatch
  kContract,   // violated precondition
  kDimension,  // tensor shape mismatch
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::kContract, what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(ErrorKind::kDimension, what) {}
};

enum class DecodeFailure { kBadMagic, kBadVersion, kChecksum, kTruncated, kCorrupt };

class DecodeError : public Error {
 public:
  DecodeError(DecodeFailure failure, const std::string& what)
      : Error(ErrorKind::kDecode, what), failure_(failure) {}
  DecodeFailure failure() const { return failure_; }

 private:
  DecodeFailure failure_;
};

// Process exit code for the CLI.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kData: return 3;
    case ErrorKind::kNumeric: return 4;
    case ErrorKind::kDecode: return 5;
    default: return 1;
  }
}

#define ADCGS_REQUIRE(cond, msg)                  \
  do {                                            \
    if (!(cond)) throw ::adcgs::ContractError(msg); \
  } while (0)

}  // namespace adcgs

#endif  // ADCGS_ERROR_H_
