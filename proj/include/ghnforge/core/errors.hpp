#pragma once

#include <stdexcept>
#include <string>

namespace ghnforge {

// Error taxonomy shared across modules. Exit-code mapping lives in the CLI:
// ConfigError -> 2, numeric failures -> 3, IoError -> 4.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CycleError : std::runtime_error {
  explicit CycleError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct DanglingNode : std::runtime_error {
  explicit DanglingNode(const std::string& msg) : std::runtime_error(msg) {}
};

struct GenerationExhausted : std::runtime_error {
  explicit GenerationExhausted(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonFiniteActivation : std::runtime_error {
  int node_id;  // first offending node
  NonFiniteActivation(int node, const std::string& msg)
      : std::runtime_error(msg), node_id(node) {}
};

struct NonFiniteLoss : std::runtime_error {
  std::string arch_name;
  NonFiniteLoss(std::string arch, const std::string& msg)
      : std::runtime_error(msg), arch_name(std::move(arch)) {}
};

struct DivergedError : std::runtime_error {
  explicit DivergedError(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnsupportedShape : std::runtime_error {
  explicit UnsupportedShape(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateTensor : std::runtime_error {
  explicit DegenerateTensor(const std::string& msg) : std::runtime_error(msg) {}
};

struct AllTied : std::runtime_error {
  explicit AllTied(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ghnforge
