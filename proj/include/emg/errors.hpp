#pragma once

#include <stdexcept>
#include <string>

namespace emg {

// Base class for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad filter/analysis configuration (cutoff above Nyquist, nonpositive width, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed caller input (empty recording, overlapping boundaries, ...).
struct InputError : Error {
  using Error::Error;
};

// A recording produced no usable contraction segments.
struct EmptySegmentationError : Error {
  using Error::Error;
};

// Segment too short for the requested spectral window.
struct InsufficientDataError : Error {
  using Error::Error;
};

// Feature undefined for this spectrum (zero total power).
struct UndefinedFeatureError : Error {
  using Error::Error;
};

// Fewer than 3 correspondences, or a collinear point configuration.
struct DegenerateRegistrationError : Error {
  using Error::Error;
};

// Fiducial registration residual above tolerance.
struct UnreliableScanError : Error {
  using Error::Error;
};

// Corner quadrilateral does not look like the nominal array rectangle.
struct CornerLabelingError : Error {
  using Error::Error;
};

// Curve fit impossible (all points at one distance, too few points).
struct UnfittableError : Error {
  using Error::Error;
};

// Wilcoxon sample collapsed to all-zero differences.
struct DegenerateSampleError : Error {
  using Error::Error;
};

// No closest-electrode pairs within the separation cutoff.
struct InsufficientOverlapError : Error {
  using Error::Error;
};

// Manifest / file ingestion problems; message carries path and field.
struct LoadError : Error {
  using Error::Error;
};

}  // namespace emg
