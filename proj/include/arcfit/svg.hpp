#pragma once

#include <span>
#include <string>

#include "arcfit/fitter.hpp"

namespace arcfit {

/// Static plot of a dataset and (optionally) a fitted spline: data points
/// with their confidence ellipses, arc paths, and distinct marks for arc and
/// middle nodes. Output bytes are deterministic for fixed input.
std::string render_svg_text(std::span<const DataPoint> points, const ArcSpline* spline,
                            double confidence = 0.99);

void render_svg(const std::string& path, std::span<const DataPoint> points,
                const ArcSpline* spline, double confidence = 0.99);

}  // namespace arcfit
