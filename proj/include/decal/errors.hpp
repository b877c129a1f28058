#pragma once

#include <stdexcept>
#include <string>

namespace decal {

enum class ErrorCode {
    io,               // missing / unreadable / unwritable files
    parse,            // malformed file content (row-indexed where possible)
    schema,           // missing or mismatched schema_version, structural fields
    unknown_method,   // calibrator method tag not recognized
    invalid_argument, // violated precondition (ranges, single-class data, ...)
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_io(const std::string& msg) {
    throw Error(ErrorCode::io, msg);
}

[[noreturn]] inline void throw_parse(const std::string& msg) {
    throw Error(ErrorCode::parse, msg);
}

[[noreturn]] inline void throw_schema(const std::string& msg) {
    throw Error(ErrorCode::schema, msg);
}

[[noreturn]] inline void throw_invalid(const std::string& msg) {
    throw Error(ErrorCode::invalid_argument, msg);
}

} // namespace decal
