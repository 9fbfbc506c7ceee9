#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mapod {

// Every failure raised by the library derives from Error so callers can
// catch broadly and still report the specific kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MAPOD_ERROR_KIND(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

MAPOD_ERROR_KIND(ArgumentError);
MAPOD_ERROR_KIND(DomainError);
MAPOD_ERROR_KIND(SchemaError);
MAPOD_ERROR_KIND(DataError);
MAPOD_ERROR_KIND(SpecError);
MAPOD_ERROR_KIND(UnsupportedDimensionError);
MAPOD_ERROR_KIND(SingularDesignError);
MAPOD_ERROR_KIND(UnderdeterminedError);
MAPOD_ERROR_KIND(InsufficientDataError);
MAPOD_ERROR_KIND(LeverageError);
MAPOD_ERROR_KIND(ConditioningError);
MAPOD_ERROR_KIND(FitError);
MAPOD_ERROR_KIND(DegenerateVarianceError);
MAPOD_ERROR_KIND(DegenerateDispersionError);
MAPOD_ERROR_KIND(CoverageError);

#undef MAPOD_ERROR_KIND

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(what), row_(row), column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

// Raised when a POD curve never reaches the requested probability.
class NotAttainedError : public Error {
 public:
  NotAttainedError(const std::string& what, double max_pod)
      : Error(what), max_pod_(max_pod) {}
  double max_pod() const noexcept { return max_pod_; }

 private:
  double max_pod_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : Error("config field '" + field + "': " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mapod
