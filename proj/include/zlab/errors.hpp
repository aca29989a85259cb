#pragma once

#include <stdexcept>
#include <string>

namespace zlab {

/// Base class for every error thrown by this library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatches, non-finite entries, bad shapes.
struct invalid_input : error {
    using error::error;
};

/// A point left the domain it was required to stay in (membership failures,
/// balls not contained in the family domain, radii exceeding a step's range).
struct domain_violation : error {
    using error::error;
};

/// Group element too close to the singular locus (e.g. |det| below threshold).
struct degenerate_element : error {
    using error::error;
};

/// Family with identically vanishing differential where a maximizer is needed.
struct degenerate_family : error {
    using error::error;
};

/// Target frame failed its orthonormality check.
struct invalid_frame : error {
    using error::error;
};

/// Magnitudes that would overflow the double-precision exponential range.
struct range_overflow : error {
    using error::error;
};

/// Grid scans that failed on too many nodes or exceeded resource caps.
struct scan_failure : error {
    using error::error;
};

/// Scenario configuration problems (unknown names, unparsable values).
struct config_error : error {
    using error::error;
};

/// Conditions that indicate a broken internal invariant, not bad user input.
struct internal_error : error {
    using error::error;
};

} // namespace zlab
