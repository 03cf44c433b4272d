#pragma once

#include <stdexcept>
#include <string>

namespace delaynet {

/// Bad user input: malformed files, invalid topologies, out-of-range flags.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical procedure could not complete (defective matrix, Newton
/// non-convergence, contour passing through a root after retries).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// A simulated trajectory left the divergence bound.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace delaynet
