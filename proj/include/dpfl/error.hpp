#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dpfl {

/// Library-wide exception. Every failure carries a stable machine-readable
/// kind (e.g. "rank-deficient", "non-convergence") next to the human message,
/// so sweep drivers can record structured failure reasons.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace dpfl
