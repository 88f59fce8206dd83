#pragma once

#include <stdexcept>
#include <string>

namespace ciuupi {

// Error types thrown by the numeric and statistical layers. Each one names
// the condition it reports; callers that treat a condition as data (e.g. the
// simulation engine counting failed fits) catch the specific type.

struct NoBracket : std::runtime_error {
    explicit NoBracket(const std::string& what) : std::runtime_error(what) {}
};

struct SingularInformation : std::runtime_error {
    explicit SingularInformation(const std::string& what) : std::runtime_error(what) {}
};

struct OptimFailed : std::runtime_error {
    explicit OptimFailed(const std::string& what) : std::runtime_error(what) {}
};

struct ConstrainedFitFailed : std::runtime_error {
    explicit ConstrainedFitFailed(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateSlope : std::runtime_error {
    explicit DegenerateSlope(const std::string& what) : std::runtime_error(what) {}
};

struct ProjectionFailed : std::runtime_error {
    explicit ProjectionFailed(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ciuupi
