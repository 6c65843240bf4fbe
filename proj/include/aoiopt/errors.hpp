#pragma once

#include <stdexcept>
#include <string>

namespace aoiopt {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid argument to a mathematical operation (non-finite, negative, ...).
struct DomainError : Error {
  using Error::Error;
};

// A series or iteration failed to reach its accuracy contract.
struct AccuracyError : Error {
  using Error::Error;
};

// Invalid or inconsistent configuration values.
struct ConfigError : Error {
  using Error::Error;
};

// A decision violates the optimization-problem bounds; message names the bound.
struct FeasibilityError : Error {
  using Error::Error;
};

// Too few neighbors for the collision model to be meaningful.
struct DegenerateScenarioError : Error {
  using Error::Error;
};

// Selection window too small relative to the sensed neighborhood.
struct ResourceExhaustionError : Error {
  using Error::Error;
};

// An expectation diverges (failure probability at or above one).
struct DivergenceError : Error {
  using Error::Error;
};

// Channel correlation too close to one; derived quantities overflow.
struct DegenerateChannelError : Error {
  using Error::Error;
};

// Transition probabilities left [0, 1]; configuration is physically meaningless.
struct InvalidChannelError : Error {
  using Error::Error;
};

// A Markov chain with a persistence probability of exactly one.
struct AbsorbingChainError : Error {
  using Error::Error;
};

// Losses or gradients became non-finite during training.
struct TrainingDivergenceError : Error {
  using Error::Error;
};

// The model endpoint could not be reached within the retry budget.
struct EndpointError : Error {
  using Error::Error;
};

// The search space contains no feasible point.
struct InfeasibleSpaceError : Error {
  using Error::Error;
};

}  // namespace aoiopt
