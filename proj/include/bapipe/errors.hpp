#pragma once

#include <stdexcept>
#include <string>

namespace bapipe {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input syntax (bad JSON etc.).
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

// Well-formed input violating the schema or an invariant.
struct SchemaError : Error {
    explicit SchemaError(const std::string& msg) : Error("schema error: " + msg) {}
};

// Schedule kind does not match the cluster execution mode.
struct IncompatibleSchedule : Error {
    explicit IncompatibleSchedule(const std::string& msg)
        : Error("incompatible schedule: " + msg) {}
};

// Fewer layers (or coarse blocks) than pipeline stages.
struct InfeasibleShape : Error {
    explicit InfeasibleShape(const std::string& msg)
        : Error("infeasible shape: " + msg) {}
};

// No plan satisfies memory / bandwidth constraints.
struct Infeasible : Error {
    explicit Infeasible(const std::string& msg) : Error("infeasible: " + msg) {}
};

struct InvalidPlan : Error {
    explicit InvalidPlan(const std::string& msg) : Error("invalid plan: " + msg) {}
};

struct NoFeasiblePlan : Error {
    explicit NoFeasiblePlan(const std::string& msg)
        : Error("no feasible plan: " + msg) {}
};

}  // namespace bapipe
