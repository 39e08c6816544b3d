#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace potwalk {

// All domain errors carry a stable machine-readable code next to the
// human-readable message. The CLI maps codes to exit statuses.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define POTWALK_DEFINE_ERROR(Name)                                        \
    class Name : public Error {                                           \
    public:                                                               \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

POTWALK_DEFINE_ERROR(InvalidSpec);
POTWALK_DEFINE_ERROR(ValidationError);
POTWALK_DEFINE_ERROR(WindowTooSmall);
POTWALK_DEFINE_ERROR(MaxIterExceeded);
POTWALK_DEFINE_ERROR(EmptyTargetSet);
POTWALK_DEFINE_ERROR(EmptySet);
POTWALK_DEFINE_ERROR(MarginViolation);
POTWALK_DEFINE_ERROR(UnboundedComponent);
POTWALK_DEFINE_ERROR(NoSpanningCluster);
POTWALK_DEFINE_ERROR(PreconditionViolated);
POTWALK_DEFINE_ERROR(DegenerateNorm);

#undef POTWALK_DEFINE_ERROR

} // namespace potwalk
