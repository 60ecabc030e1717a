#pragma once

#include <stdexcept>
#include <string>

namespace fabfix {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Geometry outside the canvas (rasterization rectangles, patch offsets).
class BoundsError : public Error {
public:
    using Error::Error;
};

/// Invalid parameter value (sigma <= 0, stride <= 0, bad threshold, ...).
class ParamError : public Error {
public:
    using Error::Error;
};

/// Raster or tensor dimension mismatch; message names both shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed file content (PGM/PPM headers, weight files, configs).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Pattern generator could not satisfy its density bounds.
class GenerationError : public Error {
public:
    using Error::Error;
};

/// Training diverged (non-finite loss); message carries the epoch index.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Optimizer rejected an update (non-finite gradient); names the block.
class OptimizerError : public Error {
public:
    using Error::Error;
};

/// A library invariant was violated; indicates a bug, not bad input.
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace fabfix
