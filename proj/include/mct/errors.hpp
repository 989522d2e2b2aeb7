#pragma once
#include <stdexcept>
#include <string>

namespace mct {

// Malformed inputs: bad files, inconsistent datasets or models.
class DataError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// An iterative solver ran out of iterations before meeting its tolerance.
class ConvergenceError : public std::runtime_error
{
public:
    ConvergenceError(const std::string& what, double achieved_error, int iterations)
        : std::runtime_error(what + " (marginal error " + std::to_string(achieved_error)
                             + " after " + std::to_string(iterations) + " iterations)"),
          achieved_error_(achieved_error),
          iterations_(iterations)
    {}

    double achieved_error() const noexcept { return achieved_error_; }
    int iterations() const noexcept { return iterations_; }

private:
    double achieved_error_;
    int iterations_;
};

} // namespace mct
