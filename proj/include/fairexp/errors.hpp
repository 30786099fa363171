#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairexp {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  DimensionError(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) +
              ", got " + std::to_string(got)) {}
};

// Median split on a feature that cannot separate the documents.
class DegenerateGroupingError : public Error {
 public:
  using Error::Error;
};

// Certain orders between uncertainty components contain a directed cycle.
class PartitionInfeasibleError : public Error {
 public:
  PartitionInfeasibleError(const std::string& what, std::vector<std::size_t> cycle)
      : Error(what), cycle_(std::move(cycle)) {}
  // Document indices along the offending cycle, first element repeated at the end.
  const std::vector<std::size_t>& cycle() const { return cycle_; }

 private:
  std::vector<std::size_t> cycle_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class InfeasibleTemplateError : public Error {
 public:
  using Error::Error;
};

// Fewer candidates than display positions.
class ShortListError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairexp
