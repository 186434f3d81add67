#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sparsefact {

inline constexpr const char* version = "0.1.0";

// Base class for everything this library throws. Warning-grade conditions
// (ambiguous rounding, non-convergence) are returned as flags, not thrown.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

struct NonFinite : Error {
    explicit NonFinite(const std::string& msg) : Error(msg) {}
};

// recovery ----------------------------------------------------------------

struct NoEdge : Error {
    explicit NoEdge(const std::string& msg) : Error(msg) {}
};

struct Inconsistent : Error {
    explicit Inconsistent(const std::string& msg) : Error(msg) {}
};

struct NonPositiveMode : Error {
    explicit NonPositiveMode(const std::string& msg) : Error(msg) {}
};

struct Unsupported : Error {
    explicit Unsupported(const std::string& msg) : Error(msg) {}
};

struct IncompleteRecovery : Error {
    std::size_t candidate_count;
    IncompleteRecovery(std::size_t count, const std::string& msg)
        : Error(msg), candidate_count(count) {}
};

// peeling -----------------------------------------------------------------

struct IllConditioned : Error {
    double cond_estimate;
    IllConditioned(double cond, const std::string& msg) : Error(msg), cond_estimate(cond) {}
};

struct Singular : Error {
    explicit Singular(const std::string& msg) : Error(msg) {}
};

// reversal ----------------------------------------------------------------

struct ZeroMatrix : Error {
    explicit ZeroMatrix(const std::string& msg) : Error(msg) {}
};

}  // namespace sparsefact
