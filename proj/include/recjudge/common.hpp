#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace recjudge {

inline constexpr const char* kToolVersion = "recjudge 0.1.0";

// Error taxonomy. The CLI maps these onto process exit codes:
//   UsageError -> 1, ValidationError (and subclasses) -> 2,
//   partial judge failure -> 3, BackendError -> 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed file contents (a validation error with a file location).
class FormatError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Agreement filter matched zero pairs; distinct from zero agreement.
class NoPairsError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class BackendError : public Error {
public:
    using Error::Error;
};

inline std::string format_fixed(double value, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    return buf;
}

// Compact decimal rendering for prompt text: trims trailing zeros ("3.90" -> "3.9").
inline std::string format_compact(double value) {
    std::string s = format_fixed(value, 2);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace recjudge
