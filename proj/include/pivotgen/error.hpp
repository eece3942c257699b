#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pivotgen {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::string path, std::size_t line, const std::string& reason)
      : Error(path + ":" + std::to_string(line) + ": " + reason),
        path_(std::move(path)),
        line_(line) {}

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

}  // namespace pivotgen
