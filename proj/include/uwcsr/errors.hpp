#pragma once

#include <stdexcept>

namespace uwcsr {

// Malformed config text or unknown key.
class ConfigParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed config whose values are out of range or inconsistent.
class ConfigSemanticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required model or dataset is absent.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uwcsr
