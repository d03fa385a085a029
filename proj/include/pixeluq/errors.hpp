#pragma once

#include <stdexcept>
#include <string>

namespace pixeluq {

// Coarse classification used by the command line to pick an exit code.
enum class ErrorCategory { Usage, Data, Numeric };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ErrorCategory category() const noexcept { return ErrorCategory::Data; }
};

#define PIXELUQ_DEFINE_ERROR(Name, Category)                                   \
  class Name : public Error {                                                  \
   public:                                                                     \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {}       \
    ErrorCategory category() const noexcept override { return Category; }      \
  };

PIXELUQ_DEFINE_ERROR(ConfigError, ErrorCategory::Usage)
PIXELUQ_DEFINE_ERROR(AtlasFormatError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(AtlasGeometryError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(EmptyInputError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(GeometryError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(IoError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(FormatError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(CorruptWeightsError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(DomainError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(InputError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(IndexError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(DegenerateInputError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(DataError, ErrorCategory::Data)
PIXELUQ_DEFINE_ERROR(NumericsError, ErrorCategory::Numeric)

#undef PIXELUQ_DEFINE_ERROR

}  // namespace pixeluq
