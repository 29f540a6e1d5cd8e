#pragma once

#include <stdexcept>
#include <string>

namespace rix {

enum class ErrorCode {
    kInvalidArgument = 1,
    kCorruptStream = 2,
    kAddress = 3,
    kPrecondition = 4,
    kParse = 5,
    kUnsupported = 6,
    kIo = 7,
};

// Every failure raised by the core library carries one of the codes above so
// the C layer can translate it without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const char* what) {
    if (!ok) throw Error(code, what);
}

}  // namespace rix
