#pragma once

#include <stdexcept>
#include <string>

namespace emarig {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input/format error carrying a 1-based line number when known.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, long line = 0)
        : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    long line() const { return line_; }

private:
    long line_ = 0;
};

}  // namespace emarig
