#pragma once

#include <stdexcept>
#include <string>

namespace bsldm {

enum class Status {
    Ok = 0,
    InvalidArgument = 1,
    Io = 2,
    Precondition = 3,
    Numeric = 4,
    Internal = 5,
};

inline const char* status_name(Status s) {
    switch (s) {
        case Status::Ok: return "ok";
        case Status::InvalidArgument: return "invalid_argument";
        case Status::Io: return "io_error";
        case Status::Precondition: return "precondition_failed";
        case Status::Numeric: return "numeric_error";
        case Status::Internal: return "internal_error";
    }
    return "unknown";
}

// Carries a status code across the core; the C boundary maps it to an int.
class Error : public std::runtime_error {
public:
    Error(Status status, const std::string& msg)
        : std::runtime_error(msg), status_(status) {}
    Status status() const noexcept { return status_; }

private:
    Status status_;
};

[[noreturn]] inline void fail(Status s, const std::string& msg) {
    throw Error(s, msg);
}

inline void require(bool cond, Status s, const std::string& msg) {
    if (!cond) fail(s, msg);
}

}  // namespace bsldm
