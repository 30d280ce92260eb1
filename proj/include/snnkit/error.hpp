#pragma once

#include <stdexcept>
#include <string>

namespace snnkit {

// Base for everything thrown by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or size contract violated (the message names both shapes).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Bad scalar argument (range, sign, out-of-bounds index).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Malformed file: IDX, checkpoint, config.
class FormatError : public Error {
public:
    using Error::Error;
};

// Training loop failure (divergence, non-finite gradient).
class TrainingError : public Error {
public:
    using Error::Error;
};

// Clock-driven simulation failure (non-finite potential).
class SimulationError : public Error {
public:
    using Error::Error;
};

// Operation called in the wrong lifecycle order.
class StateError : public Error {
public:
    using Error::Error;
};

// ANN->SNN conversion failure (dead layer, zero scaling factor).
class ConversionError : public Error {
public:
    using Error::Error;
};

// A rate layer whose threshold collapsed to ~0.
class DegenerateThresholdError : public ConversionError {
public:
    using ConversionError::ConversionError;
};

}  // namespace snnkit
