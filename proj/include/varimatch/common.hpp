#pragma once

#include <stdexcept>
#include <string>

namespace varimatch {

/// Inputs disagree on ambient dimension n or plane dimension d.
class DimensionMismatchError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A Grassmann inner product was requested for a rank-deficient frame.
class DegenerateFrameError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file (OBJ/CSV/JSON); message carries location info.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structurally valid file violating a schema constraint; names the key.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user-supplied value (config field, flag range, kernel choice).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation produced non-finite values (blow-up, overflow).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace varimatch
