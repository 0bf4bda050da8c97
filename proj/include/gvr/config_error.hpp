#pragma once

#include <stdexcept>
#include <string>

namespace gvr {

// Raised for configuration documents that fail validation; field() names the
// offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace gvr
