#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mlab {

// Base error. `code()` is a stable machine-readable tag, the message carries
// the violated invariant and the worst offending value.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define MLAB_DEFINE_ERROR(NAME, CODE)                        \
    class NAME : public Error {                              \
    public:                                                  \
        explicit NAME(const std::string& message)            \
            : Error(CODE, message) {}                        \
    }

MLAB_DEFINE_ERROR(DimensionError, "dimension_error");
MLAB_DEFINE_ERROR(NotHermitian, "not_hermitian");
MLAB_DEFINE_ERROR(NotPositive, "not_positive");
MLAB_DEFINE_ERROR(TraceNotOne, "trace_not_one");
MLAB_DEFINE_ERROR(NotUnitary, "not_unitary");
MLAB_DEFINE_ERROR(NotNormalized, "not_normalized");
MLAB_DEFINE_ERROR(GramNotNonnegative, "gram_not_nonnegative");
MLAB_DEFINE_ERROR(FactorizationNotFound, "factorization_not_found");
MLAB_DEFINE_ERROR(InconsistentFactorization, "inconsistent_factorization");
MLAB_DEFINE_ERROR(NoEraserFound, "no_eraser_found");
MLAB_DEFINE_ERROR(NotEraser, "not_eraser");
MLAB_DEFINE_ERROR(UndefinedEntry, "undefined_entry");
MLAB_DEFINE_ERROR(BoundViolated, "bound_violated");
MLAB_DEFINE_ERROR(ValidationError, "validation_error");
MLAB_DEFINE_ERROR(InternalError, "internal_error");

#undef MLAB_DEFINE_ERROR

}  // namespace mlab
