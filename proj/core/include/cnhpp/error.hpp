#pragma once

#include <stdexcept>
#include <string>

namespace cnhpp {

// Malformed or inconsistent input data (files, ids, shapes).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical guard tripped, e.g. an intensity that would overflow exp().
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cnhpp
