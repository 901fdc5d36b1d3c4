#ifndef MBNLS_ERRORS_HPP
#define MBNLS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mbnls {

// Config / precondition violations. The CLI maps this to exit code 2.
struct ValidationError : std::invalid_argument {
    explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A bubble (or transform target) falls below the resolvable scale of the grid.
struct ResolutionError : std::runtime_error {
    explicit ResolutionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Field values overflowed or went non-finite during time stepping.
struct DivergedError : std::runtime_error {
    explicit DivergedError(const std::string& msg) : std::runtime_error(msg) {}
};

// Rescaled support escaped the periodic box; carries the estimated lost mass.
struct TruncationError : std::runtime_error {
    double boundary_mass;
    TruncationError(const std::string& msg, double m)
        : std::runtime_error(msg), boundary_mass(m) {}
};

} // namespace mbnls

#endif
