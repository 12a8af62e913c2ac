#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgm {

/// Invalid run configuration or argument. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
    explicit ConfigError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out = "invalid configuration:";
        for (const auto& s : items) out += "\n  - " + s;
        return out;
    }
    std::vector<std::string> problems_;
};

/// Malformed input file. Carries the 1-based line number (0 when not applicable).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t line)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A numeric computation produced non-finite values or blew up.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int divergence = 3;
}  // namespace exit_code

}  // namespace sgm
