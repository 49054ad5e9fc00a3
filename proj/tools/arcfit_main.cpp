#include <CLI11.hpp>

#include "arcfit/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"G1-continuous arc spline approximation of noisy 2D points"};
    app.require_subcommand(1);

    // generate
    std::string gen_kind;
    arcfit::GenParams gen_params;
    uint64_t seed = 1;
    std::string output;
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
    generate->add_option("kind", gen_kind, "circle|two-arc|line|s-curve")->required();
    generate->add_option("--seed", seed, "RNG seed");
    generate->add_option("--output", output, "points file to write")->required();
    generate->add_option("--n", gen_params.n, "number of points");
    generate->add_option("--radius", gen_params.radius, "radius / base radius, m");
    generate->add_option("--radius2", gen_params.radius2, "second arc radius, m");
    generate->add_option("--span-deg", gen_params.span_deg, "arc span, degrees");
    generate->add_option("--span2-deg", gen_params.span2_deg, "second arc span, degrees");
    generate->add_option("--length", gen_params.length, "line length, m");
    generate->add_option("--noise-min", gen_params.noise_std_min, "min per-axis sigma, m");
    generate->add_option("--noise-max", gen_params.noise_std_max, "max per-axis sigma, m");
    generate->add_option("--noise-scale", gen_params.noise_scale, "0 disables noise");

    // ingest
    std::string trajectory;
    std::string side = "left";
    auto* ingest = app.add_subcommand("ingest", "Trajectory -> lane points with covariance");
    ingest->add_option("trajectory", trajectory, "trajectory file")->required();
    ingest->add_option("--side", side, "left|right")->check(CLI::IsMember({"left", "right"}));
    ingest->add_option("--output", output, "points file to write")->required();

    // fit-single / fit-multi
    std::string input, config, plot;
    auto* fit_single = app.add_subcommand("fit-single", "Fit one arc");
    fit_single->add_option("input", input, "points file")->required();
    fit_single->add_option("--config", config, "configuration file");
    fit_single->add_option("--output", output, "spline file to write")->required();

    auto* fit_multi = app.add_subcommand("fit-multi", "Fit a G1 arc spline");
    fit_multi->add_option("input", input, "points file")->required();
    fit_multi->add_option("--config", config, "configuration file");
    fit_multi->add_option("--output", output, "spline file to write")->required();
    fit_multi->add_option("--plot", plot, "SVG plot to write");

    // render
    std::string spline_path;
    auto* render = app.add_subcommand("render", "Plot points (and a spline) to SVG");
    render->add_option("points", input, "points file")->required();
    render->add_option("spline", spline_path, "spline file (optional)");
    render->add_option("--output", output, "SVG file to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    if (generate->parsed()) return arcfit::cmd_generate(gen_kind, gen_params, seed, output);
    if (ingest->parsed())
        return arcfit::cmd_ingest(trajectory, output,
                                  side == "left" ? arcfit::LaneSide::Left
                                                 : arcfit::LaneSide::Right);
    if (fit_single->parsed()) return arcfit::cmd_fit_single(input, config, output);
    if (fit_multi->parsed()) return arcfit::cmd_fit_multi(input, config, output, plot);
    if (render->parsed()) return arcfit::cmd_render(input, spline_path, output);
    return 2;
}
