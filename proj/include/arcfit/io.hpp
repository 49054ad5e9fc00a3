#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arcfit/fitter.hpp"
#include "arcfit/lane_ingest.hpp"

namespace arcfit {

/// FNV-1a 64-bit hash, used to stamp outputs with their configuration.
uint64_t fnv1a64(std::string_view bytes);

/// Write via a temporary file and rename, so readers never see partial
/// content. Throws OutputError.
void atomic_write_text(const std::string& path, const std::string& content);

std::string read_text_file(const std::string& path);

// ---------------------------------------------------------------------------
// Points file: CSV with header "index,x,y,sxx,sxy,syy", values at fixed
// 9-decimal precision. Indices must run 1..n without gaps; covariances are
// validated (and floored) on load.
// ---------------------------------------------------------------------------

std::string format_points_file(std::span<const DataPoint> points);
std::vector<DataPoint> parse_points_file(const std::string& text);
std::vector<DataPoint> read_points_file(const std::string& path);
void write_points_file(const std::string& path, std::span<const DataPoint> points);

// ---------------------------------------------------------------------------
// Spline file: JSON carrying the node parameterization (source of truth),
// derived per-segment geometry, association, and summary metadata.
// ---------------------------------------------------------------------------

struct SplineFileData {
    ArcSpline spline;
    std::string verdict;
    std::string config_hash;
};

std::string format_spline_file(const ArcSpline& spline, const std::string& verdict,
                               const std::string& config_hash);
void write_spline_file(const std::string& path, const ArcSpline& spline,
                       const std::string& verdict, const std::string& config_hash);

/// Parses and cross-checks the derived geometry against the nodes (1e-9).
SplineFileData read_spline_file(const std::string& path);

// ---------------------------------------------------------------------------
// Trajectory file: CSV per vehicle state. Rotation is either a row-major
// 3x3 block (columns r11..r33) or a quaternion (columns qw,qx,qy,qz);
// the joint 9x9 covariance is stored as its 45 upper-triangle values.
// ---------------------------------------------------------------------------

std::vector<VehicleState> read_trajectory_file(const std::string& path);
void write_trajectory_file(const std::string& path, std::span<const VehicleState> states);

// ---------------------------------------------------------------------------
// Configuration: "key = value" lines, '#' comments. Keys mirror the
// FitConfig / SolverSettings field names in lower snake case.
// ---------------------------------------------------------------------------

FitConfig parse_config(const std::string& text);
FitConfig load_config(const std::string& path);  // empty path = defaults

}  // namespace arcfit
