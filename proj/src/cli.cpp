#include "arcfit/cli.hpp"

#include <cstdio>
#include <functional>
#include <optional>

#include "arcfit/io.hpp"
#include "arcfit/svg.hpp"

namespace arcfit {

namespace {

int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const OutputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
}

std::string config_hash_of(const std::string& config_path) {
    const std::string bytes = config_path.empty() ? std::string() : read_text_file(config_path);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

}  // namespace

int cmd_generate(const std::string& kind, const GenParams& params, uint64_t seed,
                 const std::string& output, bool quiet) {
    return run_guarded([&] {
        const GenKind k = parse_gen_kind(kind);
        const Generated gen = generate_dataset(k, params, seed);
        write_points_file(output, gen.points);
        atomic_write_text(output + ".truth.json", format_truth_file(k, seed, gen.truth));
        if (!quiet)
            std::printf("generated %zu points (%s), total length %.3f m\n", gen.points.size(),
                        kind.c_str(), gen.truth.total_length);
    });
}

int cmd_ingest(const std::string& trajectory_path, const std::string& output, LaneSide side,
               bool quiet) {
    return run_guarded([&] {
        const auto states = read_trajectory_file(trajectory_path);
        if (states.empty()) throw InputError(trajectory_path + ": no states");
        std::vector<DataPoint> points;
        points.reserve(states.size());
        for (size_t i = 0; i < states.size(); ++i)
            points.push_back(to_planar(propagate(states[i], side), static_cast<int>(i) + 1));
        write_points_file(output, points);
        if (!quiet)
            std::printf("ingested %zu states -> %zu %s-lane points\n", states.size(),
                        points.size(), side == LaneSide::Left ? "left" : "right");
    });
}

int cmd_fit_single(const std::string& input, const std::string& config_path,
                   const std::string& output, bool quiet) {
    return run_guarded([&] {
        const auto points = read_points_file(input);
        const FitConfig cfg = load_config(config_path);
        const SingleArcResult fit = fit_single_arc(points, cfg);
        if (fit.report.termination == Termination::EvaluationFailure ||
            fit.report.termination == Termination::StepStall)
            throw SolverFailure(std::string("single-arc fit failed: ") +
                                to_string(fit.report.termination));

        NodeVector nodes(1);
        nodes.set_arc(0, fit.params.a1);
        nodes.set_arc(1, fit.params.a2);
        nodes.set_mid(0, fit.params.n);
        ArcSpline spline =
            make_spline(std::move(nodes), Association{{1, static_cast<int>(points.size())}});
        const ValidationReport vrep = validate(spline, points, cfg);
        spline.segment_valid[0] = vrep.segments[0].valid;
        spline.invalid_counts[0] = vrep.segments[0].invalid_count;

        write_spline_file(output, spline, vrep.all_valid ? "valid" : "invalid",
                          config_hash_of(config_path));
        if (!quiet) {
            const double radius = spline.geometry[0] ? spline.geometry[0]->radius : 0.0;
            std::printf("cost %.6f, radius %.3f m, chi2 pass rate %.4f\n", fit.report.cost,
                        radius, vrep.pass_rate());
        }
    });
}

int cmd_fit_multi(const std::string& input, const std::string& config_path,
                  const std::string& output, const std::string& plot_path, bool quiet) {
    return run_guarded([&] {
        const auto points = read_points_file(input);
        const FitConfig cfg = load_config(config_path);
        const MultiArcResult result = fit_multi(points, cfg);

        write_spline_file(output, result.spline, to_string(result.verdict),
                          config_hash_of(config_path));
        if (!plot_path.empty())
            render_svg(plot_path, points, &result.spline, cfg.confidence);

        if (!quiet) {
            std::printf("segments %d, total length %.3f m, control points %d, verdict %s\n",
                        result.spline.segments(), result.spline.total_length(),
                        result.spline.control_points(), to_string(result.verdict));
            if (result.verdict == FitVerdict::Capped)
                std::printf("warning: segment cap reached with invalid segments remaining\n");
        }
    });
}

int cmd_render(const std::string& points_path, const std::string& spline_path,
               const std::string& output, bool quiet) {
    return run_guarded([&] {
        const auto points = read_points_file(points_path);
        const ArcSpline* spline_ptr = nullptr;
        std::optional<SplineFileData> data;
        if (!spline_path.empty()) {
            data = read_spline_file(spline_path);
            spline_ptr = &data->spline;
        }
        render_svg(output, points, spline_ptr);
        if (!quiet) std::printf("wrote %s\n", output.c_str());
    });
}

}  // namespace arcfit
