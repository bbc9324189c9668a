#pragma once

#include <stdexcept>
#include <string>

namespace drc {

// Base class for all structured failures raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- geometry ----
struct GeometryError : Error {
    using Error::Error;
};
// Internal coordinate left the representable range (|v| <= 2^31-1).
struct CoordOverflow : GeometryError {
    using GeometryError::GeometryError;
};
// Operation requires a non-empty region (e.g. min_dist_sq, bbox).
struct EmptyRegionError : GeometryError {
    using GeometryError::GeometryError;
};
// Rasterization window exceeds the configured cell cap.
struct WindowTooLarge : GeometryError {
    using GeometryError::GeometryError;
};

// ---- script language ----
struct ParseError : Error {
    int line;
    int col;
    std::string message;
    ParseError(int line_, int col_, std::string msg)
        : Error("parse error at " + std::to_string(line_) + ":" + std::to_string(col_) + ": " + msg),
          line(line_), col(col_), message(std::move(msg)) {}
};

struct SemanticError : Error {
    std::string name;     // offending identifier
    std::string message;
    SemanticError(std::string name_, std::string msg)
        : Error("semantic error on '" + name_ + "': " + msg),
          name(std::move(name_)), message(std::move(msg)) {}
};

// ---- engine ----
// Raised internally when the per-run primitive-op cap is exceeded; folded into
// an ERROR(runtime) outcome at the engine boundary.
struct EngineLimitError : Error {
    using Error::Error;
};

// ---- oracle ----
struct TestGenExhausted : Error {
    using Error::Error;
};
struct OracleUnavailable : Error {
    using Error::Error;
};
struct TemplateError : Error {
    using Error::Error;
};

// ---- benchmark / config ----
struct GenerationFailed : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct IngestError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace drc
