#pragma once

#include <stdexcept>
#include <string>

namespace hamlevy {

// Every failure carries a stable machine-readable code that surfaces in JSON
// reports and a human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct DivergentFirstMoment : Error {
    explicit DivergentFirstMoment(const std::string& w = "first absolute moment of the jump law diverges")
        : Error("divergent_first_moment", w) {}
};

struct FiniteActivityRequired : Error {
    explicit FiniteActivityRequired(const std::string& w = "jump law has infinite total rate; sampling and exact solving need finite activity")
        : Error("finite_activity_required", w) {}
};

struct NonCenteredLaw : Error {
    explicit NonCenteredLaw(const std::string& w = "jump law has nonzero mean jump; the exact recursion requires a centered law")
        : Error("non_centered_law", w) {}
};

struct TiedTimes : Error {
    explicit TiedTimes(const std::string& w = "two atom times coincide; strict time ordering is required")
        : Error("tied_times", w) {}
};

struct OutsideWindow : Error {
    explicit OutsideWindow(const std::string& w = "backward cone of the evaluation target is not covered by the sampled window")
        : Error("outside_window", w) {}
};

struct EmptyTargets : Error {
    explicit EmptyTargets(const std::string& w = "at least one target is required to build a window")
        : Error("empty_targets", w) {}
};

struct QuadratureNotConverged : Error {
    explicit QuadratureNotConverged(const std::string& w = "adaptive quadrature did not reach the requested tolerance")
        : Error("quadrature_not_converged", w) {}
};

struct DegenerateSample : Error {
    explicit DegenerateSample(const std::string& w = "sample standard deviation is zero; cannot studentize")
        : Error("degenerate_sample", w) {}
};

struct SchemaError : Error {
    explicit SchemaError(const std::string& w) : Error("schema_error", w) {}
};

struct ConflictError : Error {
    explicit ConflictError(const std::string& w) : Error("conflict_error", w) {}
};

} // namespace hamlevy
