#pragma once

#include <stdexcept>
#include <string>

namespace potloc {

// Bad configuration or command-line usage. Maps to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or missing input data. Maps to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parse failure in a line-delimited dataset file.
struct ParseError : DataError {
  ParseError(const std::string& path, int line, const std::string& field,
             const std::string& msg)
      : DataError(path + ":" + std::to_string(line) + ": field '" + field +
                  "': " + msg),
        line(line),
        field(field) {}
  int line;
  std::string field;
};

}  // namespace potloc
