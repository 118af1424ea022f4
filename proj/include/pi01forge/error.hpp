#pragma once

#include <stdexcept>
#include <string>

namespace pi01forge {

// Typed failure raised by library operations.  `kind` is a stable machine-readable
// tag (e.g. "NotACode", "SearchExhausted"); `what()` carries the human diagnostic.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& msg) {
    throw Error(kind, msg);
}

} // namespace pi01forge
