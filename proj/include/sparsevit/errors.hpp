#pragma once

#include <stdexcept>
#include <string>

namespace sparsevit {

// Tensor / vector dimensions do not line up.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input height or width is not a multiple of the patch size. Inputs are
// never resized implicitly.
struct ResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A softmax row with no unmasked entry.
struct DegenerateRowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense mask export requested for a sequence above the export cap.
struct ExportTooLargeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Memory budget below the cost of the smallest feasible resolution.
struct InfeasibleBudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config, checkpoint, plan, or argument values out of range.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File read/write or format failures.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sparsevit
