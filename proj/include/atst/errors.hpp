#pragma once

#include <stdexcept>
#include <string>

namespace atst {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonStochasticKernel : ModelError {
  using ModelError::ModelError;
};
struct NormBoundViolated : ModelError {
  using ModelError::ModelError;
};
struct CostOutOfRange : ModelError {
  using ModelError::ModelError;
};
struct NonStochasticReset : ModelError {
  using ModelError::ModelError;
};

struct EmptyTail : std::logic_error {
  using std::logic_error::logic_error;
};
struct DepthExhausted : std::logic_error {
  using std::logic_error::logic_error;
};
struct EpsilonTooLarge : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DegenerateDistribution : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct OptimizerBudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace atst
