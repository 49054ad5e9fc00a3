#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "arcfit/models.hpp"

namespace arcfit {

/// Deterministic random source: raw mt19937_64 bits mapped by hand so the
/// byte-exact output never depends on library distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    double uniform();                      // [0, 1)
    double uniform(double a, double b);    // [a, b)
    std::pair<double, double> normal_pair();  // Box-Muller

private:
    std::mt19937_64 engine_;
};

enum class GenKind { Circle, TwoArc, Line, SCurve };

/// Throws InputError for unknown names.
GenKind parse_gen_kind(const std::string& name);

struct GenParams {
    int n = 100;
    double radius = 100.0;     // circle radius / first two-arc radius / s-curve base
    double radius2 = 40.0;     // second two-arc radius
    double span_deg = 120.0;   // circle span / first two-arc span
    double span2_deg = 90.0;   // second two-arc span
    double length = 200.0;     // line length
    double noise_std_min = 1.0;   // per-axis standard deviation bounds, meters;
    double noise_std_max = 30.0;  // variances are drawn uniformly in [min^2, max^2]
    double noise_scale = 1.0;     // 0 = exact points (covariances still drawn)
    bool noise_isotropic = false; // one variance per point instead of per axis
};

struct GroundTruth {
    struct Segment {
        Point2 center;
        double radius = 0.0;
        double start_angle = 0.0;
        double sweep = 0.0;  // signed, counterclockwise positive
    };
    std::vector<Segment> segments;  // curved pieces only
    std::vector<Point2> true_points;
    double total_length = 0.0;
};

struct Generated {
    std::vector<DataPoint> points;
    GroundTruth truth;
};

/// Sample the chosen geometry uniformly by arc length, draw per-point
/// diagonal covariances, and perturb each point with noise drawn from its
/// own covariance. Identical (kind, params, seed) produce identical output.
Generated generate_dataset(GenKind kind, const GenParams& params, uint64_t seed);

std::string format_truth_file(GenKind kind, uint64_t seed, const GroundTruth& truth);

}  // namespace arcfit
