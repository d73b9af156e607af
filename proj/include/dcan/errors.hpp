#pragma once

#include <stdexcept>
#include <string>

namespace dcan {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or rank mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Caller violated an API precondition (e.g. backward from a non-scalar).
class ContractError : public Error {
public:
    using Error::Error;
};

// NaN/Inf produced by a computation.
class NumericError : public Error {
public:
    using Error::Error;
};

// Malformed dataset, dictionary, checkpoint or config file.
class FormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class EmptyDictionaryError : public Error {
public:
    using Error::Error;
};

// The dataset lacks something the requested operation needs (e.g. race).
class CapabilityError : public Error {
public:
    using Error::Error;
};

// A metric is not defined on the given data (empty group, zero variance).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

// Confounder dictionaries were not built from the training split.
class LeakageError : public Error {
public:
    using Error::Error;
};

// A CLI step was invoked before the artifact it depends on exists.
class PrerequisiteError : public Error {
public:
    using Error::Error;
};

}  // namespace dcan
