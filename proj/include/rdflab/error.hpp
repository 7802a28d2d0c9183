#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rdflab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition on an argument or configuration value failed.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A point, region or stencil does not fit inside the grid box.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A metric node is (numerically) non-invertible.
class DegenerateMetricError : public Error {
public:
    DegenerateMetricError(std::size_t node, double min_eigenvalue)
        : Error("degenerate metric at node " + std::to_string(node) +
                " (min eigenvalue " + std::to_string(min_eigenvalue) + ")"),
          node_(node), min_eigenvalue_(min_eigenvalue) {}

    std::size_t node() const noexcept { return node_; }
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    std::size_t node_;
    double min_eigenvalue_;
};

/// The flow left the near-Euclidean regime.
class BlowUpError : public Error {
public:
    BlowUpError(double time, const std::string& what)
        : Error("flow blow-up at t=" + std::to_string(time) + ": " + what), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Explicit time step no longer satisfies the stability bound.
class CflError : public Error {
public:
    using Error::Error;
};

}  // namespace rdflab
