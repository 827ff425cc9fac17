#pragma once

#include <stdexcept>
#include <string>

namespace cfinsler {

// Evaluation left the declared domain of a metric (or hit log(0), x/0, ...).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " at offset " + std::to_string(offset)), offset(offset) {}
    std::size_t offset;
};

// The Levi matrix of G failed the strong-pseudoconvexity threshold at a site.
struct SingularLevi : std::runtime_error {
    SingularLevi(const std::string& msg, double min_eigenvalue)
        : std::runtime_error(msg), min_eigenvalue(min_eigenvalue) {}
    double min_eigenvalue;
};

struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Two internal evaluation routes that must agree do not; indicates a bug.
struct InternalCheckError : std::logic_error {
    using std::logic_error::logic_error;
};

struct IntegrationError : std::runtime_error {
    enum class Kind { StepFailure, DomainExit };
    IntegrationError(Kind kind, const std::string& msg)
        : std::runtime_error(msg), kind(kind) {}
    Kind kind;
};

}  // namespace cfinsler
