#pragma once

#include <stdexcept>
#include <string>

namespace rosevo {

/// Broad failure categories; the CLI maps these onto exit codes.
enum class ErrorCategory { Config, Validation, Runtime, ReplayMismatch };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

#define ROSEVO_DEFINE_ERROR(Name, Category)                                   \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& what) : Error(Category, what) {}     \
    }

ROSEVO_DEFINE_ERROR(ArgumentError, ErrorCategory::Validation);
ROSEVO_DEFINE_ERROR(LoadError, ErrorCategory::Config);
ROSEVO_DEFINE_ERROR(ValidationError, ErrorCategory::Validation);
ROSEVO_DEFINE_ERROR(ParseError, ErrorCategory::Validation);
ROSEVO_DEFINE_ERROR(ContractViolation, ErrorCategory::Runtime);
ROSEVO_DEFINE_ERROR(ConfigError, ErrorCategory::Config);
ROSEVO_DEFINE_ERROR(ReconciliationError, ErrorCategory::Runtime);
ROSEVO_DEFINE_ERROR(TransportError, ErrorCategory::Runtime);
ROSEVO_DEFINE_ERROR(DesignerError, ErrorCategory::Runtime);
ROSEVO_DEFINE_ERROR(CalibrationError, ErrorCategory::Runtime);
ROSEVO_DEFINE_ERROR(RunError, ErrorCategory::Runtime);
ROSEVO_DEFINE_ERROR(LogFormatError, ErrorCategory::Runtime);

#undef ROSEVO_DEFINE_ERROR

} // namespace rosevo
