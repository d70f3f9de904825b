#pragma once

#include <stdexcept>
#include <string>

namespace pqscan {

// Error taxonomy. The CLI maps each type to a distinct exit code.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or unsupported quantizer structure (bad spec string, group sums, m/g).
struct invalid_spec_error : error {
    using error::error;
};

// Caller-supplied data is unusable: dimension mismatch, NaN components, bad counts.
struct input_error : error {
    using error::error;
};

// Training cannot proceed (insufficient samples, degenerate configuration).
struct training_error : error {
    using error::error;
};

// Stored data is inconsistent: out-of-range code index, packed value overflow.
struct corruption_error : error {
    using error::error;
};

// Incompatible pieces wired together (scheme/table mismatch, unavailable kernel).
struct config_error : error {
    using error::error;
};

// Distance-quantization calibration preconditions violated (t < R).
struct calibration_error : error {
    using error::error;
};

// File-level problems: missing, truncated, bad magic/version.
struct io_error : error {
    using error::error;
};

} // namespace pqscan
