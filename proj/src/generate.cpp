#include "arcfit/generate.hpp"

#include <cmath>

#include <json.hpp>

#include "arcfit/errors.hpp"

namespace arcfit {

double Rng::uniform() {
    // 53 random bits to [0, 1).
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform(); }

std::pair<double, double> Rng::normal_pair() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
}

GenKind parse_gen_kind(const std::string& name) {
    if (name == "circle") return GenKind::Circle;
    if (name == "two-arc") return GenKind::TwoArc;
    if (name == "line") return GenKind::Line;
    if (name == "s-curve") return GenKind::SCurve;
    throw InputError("unknown kind '" + name + "' (expected circle|two-arc|line|s-curve)");
}

namespace {

struct PathPiece {
    double curvature = 0.0;  // signed, 0 = straight
    double length = 0.0;
};

/// Walk a G1 chain of straights and arcs, emitting n points uniformly by
/// arc length and recording the curved pieces.
GroundTruth sample_path(const std::vector<PathPiece>& pieces, Point2 start, double heading,
                        int n) {
    GroundTruth truth;
    for (const auto& p : pieces) truth.total_length += p.length;

    // Segment bookkeeping for the truth record.
    {
        Point2 pos = start;
        double theta = heading;
        for (const auto& piece : pieces) {
            if (piece.curvature != 0.0) {
                const double r = 1.0 / std::abs(piece.curvature);
                const double dir = piece.curvature > 0.0 ? 1.0 : -1.0;
                const Point2 tangent{std::cos(theta), std::sin(theta)};
                const Point2 center = pos + perp(tangent) * (r * dir);
                const double start_angle = std::atan2(pos.y - center.y, pos.x - center.x);
                truth.segments.push_back(
                    {center, r, start_angle, piece.curvature * piece.length});
            }
            // Advance the pose to the end of the piece.
            if (piece.curvature == 0.0) {
                pos = pos + Point2{std::cos(theta), std::sin(theta)} * piece.length;
            } else {
                const double r = 1.0 / std::abs(piece.curvature);
                const double dir = piece.curvature > 0.0 ? 1.0 : -1.0;
                const Point2 tangent{std::cos(theta), std::sin(theta)};
                const Point2 center = pos + perp(tangent) * (r * dir);
                const double a0 = std::atan2(pos.y - center.y, pos.x - center.x);
                const double a1 = a0 + piece.curvature * piece.length;
                pos = center + Point2{r * std::cos(a1), r * std::sin(a1)};
                theta += piece.curvature * piece.length;
            }
        }
    }

    truth.true_points.reserve(n);
    const double step = truth.total_length / (n - 1);
    for (int k = 0; k < n; ++k) {
        double s = std::min(k * step, truth.total_length);
        Point2 pos = start;
        double theta = heading;
        for (const auto& piece : pieces) {
            const double take = std::min(s, piece.length);
            if (piece.curvature == 0.0) {
                pos = pos + Point2{std::cos(theta), std::sin(theta)} * take;
            } else {
                const double r = 1.0 / std::abs(piece.curvature);
                const double dir = piece.curvature > 0.0 ? 1.0 : -1.0;
                const Point2 tangent{std::cos(theta), std::sin(theta)};
                const Point2 center = pos + perp(tangent) * (r * dir);
                const double a0 = std::atan2(pos.y - center.y, pos.x - center.x);
                const double a1 = a0 + piece.curvature * take;
                pos = center + Point2{r * std::cos(a1), r * std::sin(a1)};
                theta += piece.curvature * take;
            }
            s -= take;
            if (s <= 0.0) break;
        }
        truth.true_points.push_back(pos);
    }
    return truth;
}

std::vector<PathPiece> pieces_for(GenKind kind, const GenParams& p) {
    const double deg = M_PI / 180.0;
    switch (kind) {
        case GenKind::Circle:
            return {{1.0 / p.radius, p.span_deg * deg * p.radius}};
        case GenKind::TwoArc:
            return {{1.0 / p.radius, p.span_deg * deg * p.radius},
                    {1.0 / p.radius2, p.span2_deg * deg * p.radius2}};
        case GenKind::Line:
            return {{0.0, p.length}};
        case GenKind::SCurve: {
            // Road-like profile: straights and gentle alternating curves,
            // scaled by the base radius (1100 m total at radius = 250).
            const double r = p.radius;
            return {{0.0, 180.0},          {1.0 / r, 260.0},       {0.0, 120.0},
                    {-1.0 / (0.6 * r), 200.0}, {1.0 / (2.0 * r), 240.0}, {0.0, 100.0}};
        }
    }
    throw InputError("unknown kind");
}

}  // namespace

Generated generate_dataset(GenKind kind, const GenParams& params, uint64_t seed) {
    if (params.n < 2) throw InputError("n must be >= 2");
    if (params.noise_std_min <= 0.0 || params.noise_std_max < params.noise_std_min)
        throw InputError("noise bounds must satisfy 0 < min <= max");
    if ((kind == GenKind::Circle || kind == GenKind::TwoArc || kind == GenKind::SCurve) &&
        params.radius <= 0.0)
        throw InputError("radius must be positive");

    Generated out;
    out.truth = sample_path(pieces_for(kind, params), {0.0, 0.0}, 0.0, params.n);

    Rng rng(seed);
    const double v_lo = params.noise_std_min * params.noise_std_min;
    const double v_hi = params.noise_std_max * params.noise_std_max;
    out.points.reserve(params.n);
    for (int i = 0; i < params.n; ++i) {
        const double sxx = rng.uniform(v_lo, v_hi);
        const double syy = params.noise_isotropic ? sxx : rng.uniform(v_lo, v_hi);
        const auto [z1, z2] = rng.normal_pair();
        DataPoint p;
        p.index = i + 1;
        p.cov = Cov2::diagonal(sxx, syy);
        p.pos = out.truth.true_points[i] +
                Point2{z1 * std::sqrt(sxx), z2 * std::sqrt(syy)} * params.noise_scale;
        out.points.push_back(p);
    }
    return out;
}

std::string format_truth_file(GenKind kind, uint64_t seed, const GroundTruth& truth) {
    nlohmann::ordered_json doc;
    const char* names[] = {"circle", "two-arc", "line", "s-curve"};
    doc["format"] = "arcfit-truth-v1";
    doc["kind"] = names[static_cast<int>(kind)];
    doc["seed"] = seed;
    doc["total_length"] = truth.total_length;

    nlohmann::ordered_json segs = nlohmann::ordered_json::array();
    for (const auto& s : truth.segments) {
        segs.push_back({{"center", {s.center.x, s.center.y}},
                        {"radius", s.radius},
                        {"start_angle", s.start_angle},
                        {"sweep", s.sweep}});
    }
    doc["segments"] = segs;

    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const auto& p : truth.true_points) pts.push_back({p.x, p.y});
    doc["true_points"] = pts;
    return doc.dump(2) + "\n";
}

}  // namespace arcfit
