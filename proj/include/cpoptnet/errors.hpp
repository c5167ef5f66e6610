#pragma once

#include <stdexcept>
#include <string>

namespace cpoptnet {

// Bad arguments, shape mismatches, malformed configs.
class ArgumentError : public std::invalid_argument {
public:
  explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Non-finite values, singular systems, diverging solves.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable/unwritable files, malformed file contents.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cpoptnet
