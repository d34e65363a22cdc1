#pragma once

#include <stdexcept>
#include <string>

namespace tlsuff {

// Base class for all library errors. `kind()` maps onto the CLI exit-code
// categories: usage/config (2), data/schema (3), numerical (4).
class Error : public std::runtime_error {
 public:
  enum class Kind { usage, data, numeric };

  Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& msg) : Error(Kind::data, msg) {}
};

class DegenerateLabels : public Error {
 public:
  explicit DegenerateLabels(const std::string& msg) : Error(Kind::data, msg) {}
};

class MissingClass : public Error {
 public:
  MissingClass(int cls, const std::string& msg) : Error(Kind::data, msg), cls_(cls) {}
  int missing_class() const { return cls_; }

 private:
  int cls_;
};

class SeparationDiverged : public Error {
 public:
  explicit SeparationDiverged(const std::string& msg) : Error(Kind::numeric, msg) {}
};

class NotConverged : public Error {
 public:
  explicit NotConverged(const std::string& msg) : Error(Kind::numeric, msg) {}
};

class DegenerateVariance : public Error {
 public:
  explicit DegenerateVariance(const std::string& msg) : Error(Kind::numeric, msg) {}
};

class TooFewSamples : public Error {
 public:
  explicit TooFewSamples(const std::string& msg) : Error(Kind::data, msg) {}
};

class CapExceeded : public Error {
 public:
  explicit CapExceeded(const std::string& msg) : Error(Kind::usage, msg) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& msg) : Error(Kind::usage, msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(Kind::usage, msg) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(Kind::data, msg) {}
};

}  // namespace tlsuff
