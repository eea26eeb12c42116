#pragma once

#include <stdexcept>
#include <string>

namespace anlf {

/// Coarse failure class; the CLI maps each class to a distinct exit code.
enum class ErrorClass { config, data, training, verification, internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

#define ANLF_DEFINE_ERROR(Name, Class)                                             \
  class Name : public Error {                                                      \
   public:                                                                         \
    explicit Name(const std::string& what) : Error(ErrorClass::Class, what) {}     \
  };

// tensor / model contracts
ANLF_DEFINE_ERROR(DimensionError, internal)
ANLF_DEFINE_ERROR(ContractError, internal)
ANLF_DEFINE_ERROR(EvaluationError, internal)

// configuration
ANLF_DEFINE_ERROR(ConfigError, config)
ANLF_DEFINE_ERROR(CompatibilityError, config)

// data pipeline
ANLF_DEFINE_ERROR(IoError, data)
ANLF_DEFINE_ERROR(SchemaError, data)
ANLF_DEFINE_ERROR(ContinuityError, data)
ANLF_DEFINE_ERROR(ParseError, data)
ANLF_DEFINE_ERROR(CoverageError, data)
ANLF_DEFINE_ERROR(DegenerateStatsError, data)
ANLF_DEFINE_ERROR(SizeError, data)
ANLF_DEFINE_ERROR(DomainError, data)

ANLF_DEFINE_ERROR(TrainingError, training)

#undef ANLF_DEFINE_ERROR

}  // namespace anlf
