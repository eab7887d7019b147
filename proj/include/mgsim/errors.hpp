#pragma once

#include <stdexcept>
#include <string>

namespace mgsim {

/// Invalid or inconsistent configuration (bad value, unknown key, bad window length).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A metric or transform was asked to work on input where it is undefined.
class DegenerateInputError : public std::domain_error {
public:
    explicit DegenerateInputError(const std::string& what) : std::domain_error(what) {}
};

/// The fixed-step integration produced a non-finite state.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, long long step, double time_s)
        : std::runtime_error(what), step_(step), time_s_(time_s) {}

    [[nodiscard]] long long step() const noexcept { return step_; }
    [[nodiscard]] double time_s() const noexcept { return time_s_; }

private:
    long long step_;
    double time_s_;
};

}  // namespace mgsim
