#ifndef FPGLMM_ERRORS_HPP
#define FPGLMM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fpglmm {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed files, schema violations, out-of-range arguments. CLI exit 2.
class InputError : public Error {
public:
  using Error::Error;
};

// Model-level boundary conditions (no finite MLE, degenerate designs,
// quantities outside the model's regime). CLI exit 3.
class ModelError : public Error {
public:
  using Error::Error;
};

// Solver breakdowns: non-convergence, singular or non-PD systems. CLI exit 4.
class NumericalError : public Error {
public:
  using Error::Error;
};

} // namespace fpglmm

#endif
