#pragma once

#include <stdexcept>
#include <string>

namespace tonosim {

// Base class for all domain errors thrown by the library.
class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

// Membrane driven into (or through) the bottom electrode: the linear
// deflection model and the charge front end are invalid at that point.
class MembraneContact : public SimError {
public:
    MembraneContact(const std::string& what, int element = -1, double time_s = -1.0)
        : SimError(what), element(element), time_s(time_s) {}
    int element;     // offending array element, -1 if not acquired through a scan
    double time_s;   // scene time of the offending sample, -1 if unknown
};

class InvalidSpec : public SimError {
public:
    using SimError::SimError;
};

class ModeMismatch : public SimError {
public:
    using SimError::SimError;
};

class DesignInfeasible : public SimError {
public:
    using SimError::SimError;
};

class InsufficientSamples : public SimError {
public:
    using SimError::SimError;
};

class NoValidData : public SimError {
public:
    using SimError::SimError;
};

class DegenerateAnchors : public SimError {
public:
    using SimError::SimError;
};

class CalibrationImpossible : public SimError {
public:
    using SimError::SimError;
};

class ConfigError : public SimError {
public:
    explicit ConfigError(const std::string& what, const std::string& key = "")
        : SimError(key.empty() ? what : key + ": " + what), key(key) {}
    std::string key;  // offending config key path, empty if file-level
};

}  // namespace tonosim
