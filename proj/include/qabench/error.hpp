#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qabench {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON, tagged corpora, weight files). Carries the
/// byte offset or line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position = 0)
        : Error(what), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

} // namespace qabench
