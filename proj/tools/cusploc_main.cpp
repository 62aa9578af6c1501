// cusploc command line: simulate cusp-onset Poisson source experiments,
// estimate source locations and reproduce the asymptotic rate/efficiency
// numbers from the library.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <cusploc/cusploc.hpp>

namespace {

using nlohmann::json;

std::string resolve_out(const std::string& out, const std::string& fallback) {
    if (!out.empty()) return out;
    if (const char* dir = std::getenv("CUSPLOC_OUT_DIR"); dir && *dir)
        return std::string(dir) + "/" + fallback;
    return fallback;
}

void print_config(const std::string& cmd, const json& cfg) {
    json j{{"command", cmd}, {"config", cfg}};
    std::cout << j.dump(2) << '\n';
}

std::vector<double> parse_doubles(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const auto next = csv.find(',', pos);
        out.push_back(std::stod(csv.substr(pos, next - pos)));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

std::vector<cusploc::Vec2> parse_points(const std::string& s) {
    std::vector<cusploc::Vec2> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const auto next = s.find(';', pos);
        const auto xy = parse_doubles(s.substr(pos, next - pos));
        if (xy.size() != 2) throw cusploc::configuration_error("bad point list: " + s);
        out.push_back({xy[0], xy[1]});
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw cusploc::io_error("cannot open output file: " + path);
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Poisson source localization with cusp-type signal onsets"};
    app.require_subcommand(1);

    std::string scenario_path, obs_path, out_path, method = "bayes";
    std::string u_list, theta0_str, config_path;
    std::uint64_t seed = 1;
    std::size_t reps = 2000;
    int grid_nx = 33, grid_ny = 33, levels = 4, threads = 1;
    double kappa = 0.25, gamma = 1.0, n_value = 1000.0;
    std::string n_list_str = "200,2000,20000";
    int field_resolution = 101;
    double field_half_width = 0.0;
    int ray_count = 8, scale_count = 20;
    double scale_min = 0.25, scale_max = 16.0;
    double r_min = 0.0, r_max = 0.0;
    int r_points = 13;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--threads", threads, "worker thread cap");
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--out", out_path, "output path (default under $CUSPLOC_OUT_DIR)");
    };

    auto* c_validate = app.add_subcommand("validate", "check a scenario against C1-C5");
    c_validate->add_option("--scenario", scenario_path)->required();

    auto* c_simulate = app.add_subcommand("simulate", "draw one observation set");
    c_simulate->add_option("--scenario", scenario_path)->required();
    add_common(c_simulate);

    auto* c_estimate = app.add_subcommand("estimate", "estimate the source location");
    c_estimate->add_option("--obs", obs_path)->required();
    c_estimate->add_option("--method", method, "bayes | mle | two-step");
    c_estimate->add_option("--grid", grid_nx, "grid resolution per axis");
    c_estimate->add_option("--levels", levels, "refinement levels");
    add_common(c_estimate);

    auto* c_field = app.add_subcommand("field", "normalized likelihood-ratio field dump");
    c_field->add_option("--obs", obs_path)->required();
    c_field->add_option("--theta0", theta0_str, "reference point 'x,y' (default source)");
    c_field->add_option("--grid", field_resolution, "u-grid resolution per axis");
    c_field->add_option("--half-width", field_half_width, "u-grid half width")->required();
    add_common(c_field);

    auto* c_constants = app.add_subcommand("constants", "rate constants R_-, R_+");
    c_constants->add_option("--kappa", kappa)->required();
    c_constants->add_option("--gamma", gamma);
    c_constants->add_option("--out", out_path);

    auto* c_limit = app.add_subcommand("limit-field", "sample zeta from the limit field");
    c_limit->add_option("--scenario", scenario_path)->required();
    c_limit->add_option("--reps", reps);
    c_limit->add_option("--grid", field_resolution, "field grid resolution per axis");
    add_common(c_limit);

    auto* c_rate = app.add_subcommand("rate-study", "Monte Carlo convergence rate study");
    c_rate->add_option("--config", config_path, "study config JSON");
    c_rate->add_option("--scenario", scenario_path, "scenario JSON (with defaults)");
    c_rate->add_option("--n-list", n_list_str);
    c_rate->add_option("--reps", reps);
    c_rate->add_option("--grid", grid_nx, "estimator grid resolution");
    c_rate->add_option("--levels", levels);
    add_common(c_rate);

    auto* c_fdd = app.add_subcommand("fdd-check", "finite-dimensional distribution check");
    c_fdd->add_option("--scenario", scenario_path)->required();
    c_fdd->add_option("--u-list", u_list, "u points 'x,y;x,y;...'")->required();
    c_fdd->add_option("--n", n_value);
    c_fdd->add_option("--reps", reps);
    add_common(c_fdd);

    auto* c_bound = app.add_subcommand("bound-check", "Hoelder and Hellinger tail checks");
    c_bound->add_option("--scenario", scenario_path)->required();
    c_bound->add_option("--n", n_value);
    c_bound->add_option("--reps", reps);
    c_bound->add_option("--scales", scale_count, "number of pair scales");
    c_bound->add_option("--scale-min", scale_min);
    c_bound->add_option("--scale-max", scale_max);
    c_bound->add_option("--rays", ray_count, "number of ray directions");
    c_bound->add_option("--r-min", r_min, "smallest ray radius (theta space)");
    c_bound->add_option("--r-max", r_max, "largest ray radius");
    c_bound->add_option("--r-points", r_points);
    add_common(c_bound);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_validate->parsed()) {
            const auto sc = cusploc::load_scenario(scenario_path);
            print_config("validate", {{"scenario", scenario_path}});
            const auto rep = cusploc::validate_scenario(sc);
            std::cout << rep.to_string();
            return rep.all_pass() ? 0 : 2;
        }

        if (c_simulate->parsed()) {
            const auto sc = cusploc::load_scenario(scenario_path);
            const std::string out = resolve_out(out_path, "obs.csv");
            print_config("simulate",
                         {{"scenario", scenario_path}, {"seed", seed}, {"out", out}});
            const auto obs = cusploc::simulate(sc, seed);
            cusploc::save_observations(obs, out);
            std::size_t total = 0;
            for (const auto& r : obs.records) total += r.times.size();
            std::cout << "events " << total << " -> " << out << '\n';
            return 0;
        }

        if (c_estimate->parsed()) {
            const auto obs = cusploc::load_observations(obs_path);
            const std::string out = resolve_out(out_path, "estimate.json");
            print_config("estimate", {{"obs", obs_path},
                                      {"method", method},
                                      {"grid", grid_nx},
                                      {"levels", levels},
                                      {"threads", threads},
                                      {"out", out}});
            cusploc::EstimateResult res;
            const auto grid = cusploc::GridSpec::for_domain(obs.scenario.domain, grid_nx, levels);
            if (method == "bayes")
                res = cusploc::bayes_estimate(obs, obs.scenario.prior, grid, threads);
            else if (method == "mle")
                res = cusploc::mle_estimate(obs, grid, threads);
            else if (method == "two-step" || method == "two_step")
                res = cusploc::two_step_estimate(obs);
            else
                throw cusploc::configuration_error("unknown method: " + method);
            const std::string text = cusploc::to_json(res).dump(2) + "\n";
            write_text(out, text);
            std::cout << text;
            return 0;
        }

        if (c_field->parsed()) {
            const auto obs = cusploc::load_observations(obs_path);
            cusploc::Vec2 theta0 = obs.scenario.source;
            if (!theta0_str.empty()) {
                const auto xy = parse_doubles(theta0_str);
                theta0 = {xy.at(0), xy.at(1)};
            }
            const std::string out = resolve_out(out_path, "field.csv");
            print_config("field", {{"obs", obs_path},
                                   {"theta0", {{"x", theta0.x}, {"y", theta0.y}}},
                                   {"grid", field_resolution},
                                   {"half_width", field_half_width},
                                   {"out", out}});
            const auto grid = cusploc::FieldGrid::square(field_half_width, field_resolution);
            std::vector<cusploc::Vec2> pts(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i) pts[i] = grid.node(i);
            const auto f = cusploc::normalized_field(obs, theta0, pts);
            cusploc::save_field_csv(f, out);
            std::cout << "field (" << grid.size() << " nodes) -> " << out << '\n';
            return 0;
        }

        if (c_constants->parsed()) {
            print_config("constants", {{"kappa", kappa}, {"gamma", gamma}});
            const auto rc = cusploc::rate_constants(gamma, kappa);
            const json j{{"kappa", kappa},
                         {"gamma", gamma},
                         {"r_minus", rc.r_minus},
                         {"r_plus", rc.r_plus}};
            std::cout << j.dump(2) << '\n';
            if (!out_path.empty()) write_text(out_path, j.dump(2) + "\n");
            return 0;
        }

        if (c_limit->parsed()) {
            const auto sc = cusploc::load_scenario(scenario_path);
            const std::string out = resolve_out(out_path, "zeta.csv");
            print_config("limit-field", {{"scenario", scenario_path},
                                         {"reps", reps},
                                         {"grid", field_resolution},
                                         {"seed", seed},
                                         {"out", out}});
            const auto bound = cusploc::efficiency_bound(sc, reps, field_resolution, seed);
            const auto geom = cusploc::local_geometry(sc, sc.source);
            const auto grid =
                cusploc::FieldGrid::square(bound.half_width, field_resolution);
            cusploc::LimitFieldSampler sampler(geom, sc.kappa, grid);
            std::ofstream os(out);
            if (!os) throw cusploc::io_error("cannot open output file: " + out);
            os << "zeta_x,zeta_y,boundary_mass\n";
            std::vector<double> log_z;
            char buf[128];
            for (std::size_t r = 0; r < reps; ++r) {
                sampler.realize(cusploc::derive_seed(seed, 2), r, log_z);
                const auto zs = cusploc::zeta_from_log_field(grid, log_z, sc.nu);
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", zs.zeta.x, zs.zeta.y,
                              zs.boundary_mass);
                os << buf;
            }
            const json j{{"e_norm2", bound.e_norm2},       {"e_norm2_se", bound.e_norm2_se},
                         {"e_norm1", bound.e_norm1},       {"e_norm1_se", bound.e_norm1_se},
                         {"half_width", bound.half_width}, {"resolution", field_resolution},
                         {"boundary_warnings", bound.boundary_warnings}};
            std::cout << j.dump(2) << '\n';
            return 0;
        }

        if (c_rate->parsed()) {
            cusploc::Scenario sc;
            cusploc::RateStudyConfig cfg;
            cfg.replicates = reps;
            cfg.n_list = parse_doubles(n_list_str);
            cfg.grid_resolution = grid_nx;
            cfg.grid_levels = levels;
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                if (!in) throw cusploc::io_error("cannot open config: " + config_path);
                json j;
                in >> j;
                if (j.at("scenario").is_string())
                    sc = cusploc::load_scenario(j.at("scenario").get<std::string>());
                else
                    sc = cusploc::scenario_from_json(j.at("scenario"));
                if (j.contains("n_list")) cfg.n_list = j.at("n_list").get<std::vector<double>>();
                if (j.contains("replicates")) cfg.replicates = j.at("replicates");
                if (j.contains("grid_resolution")) cfg.grid_resolution = j.at("grid_resolution");
                if (j.contains("levels")) cfg.grid_levels = j.at("levels");
                if (j.contains("with_two_step")) cfg.with_two_step = j.at("with_two_step");
                if (j.contains("seed")) seed = j.at("seed");
            } else if (!scenario_path.empty()) {
                sc = cusploc::load_scenario(scenario_path);
            } else {
                throw cusploc::configuration_error("rate-study needs --config or --scenario");
            }
            cfg.threads = threads;
            const std::string out_dir = resolve_out(out_path, "rate_study");
            print_config("rate-study", {{"config", config_path},
                                        {"scenario", scenario_path},
                                        {"n_list", cfg.n_list},
                                        {"replicates", cfg.replicates},
                                        {"grid_resolution", cfg.grid_resolution},
                                        {"levels", cfg.grid_levels},
                                        {"seed", seed},
                                        {"threads", threads},
                                        {"out", out_dir}});
            const auto report = cusploc::rate_study(sc, cfg, seed);
            std::filesystem::create_directories(out_dir);
            write_text(out_dir + "/report.json", cusploc::to_json(report).dump(2) + "\n");
            cusploc::save_rows_csv(report, out_dir + "/rows.csv");
            std::printf("slope_bayes %.4f +- %.4f -> %s\n", report.slope_bayes,
                        report.slope_bayes_se, out_dir.c_str());
            return 0;
        }

        if (c_fdd->parsed()) {
            const auto sc = cusploc::load_scenario(scenario_path);
            const auto pts = parse_points(u_list);
            const std::string out = resolve_out(out_path, "fdd.json");
            print_config("fdd-check", {{"scenario", scenario_path},
                                       {"n", n_value},
                                       {"reps", reps},
                                       {"seed", seed},
                                       {"threads", threads},
                                       {"u_list", u_list},
                                       {"out", out}});
            const auto report = cusploc::fdd_check(sc, pts, n_value, reps, seed, threads);
            const std::string text = cusploc::to_json(report).dump(2) + "\n";
            write_text(out, text);
            std::cout << text;
            return 0;
        }

        if (c_bound->parsed()) {
            const auto sc = cusploc::load_scenario(scenario_path);
            const std::string out = resolve_out(out_path, "bounds.json");
            if (r_min <= 0.0) r_min = 0.01 * sc.domain.diameter();
            if (r_max <= 0.0) r_max = 0.5 * sc.domain.diameter();
            print_config("bound-check", {{"scenario", scenario_path},
                                         {"n", n_value},
                                         {"reps", reps},
                                         {"seed", seed},
                                         {"threads", threads},
                                         {"scales", scale_count},
                                         {"scale_min", scale_min},
                                         {"scale_max", scale_max},
                                         {"rays", ray_count},
                                         {"r_min", r_min},
                                         {"r_max", r_max},
                                         {"r_points", r_points},
                                         {"out", out}});
            std::vector<std::pair<cusploc::Vec2, cusploc::Vec2>> pairs;
            const cusploc::Vec2 e{std::cos(0.37), std::sin(0.37)};
            for (int i = 0; i < scale_count; ++i) {
                const double s = scale_min * std::pow(scale_max / scale_min,
                                                      scale_count == 1
                                                          ? 0.0
                                                          : static_cast<double>(i) /
                                                                (scale_count - 1));
                pairs.push_back({-0.5 * s * e, 0.5 * s * e});
            }
            std::vector<cusploc::Vec2> rays;
            for (int i = 0; i < ray_count; ++i) {
                const double a = 2.0 * 3.14159265358979323846 * i / ray_count;
                rays.push_back({std::cos(a), std::sin(a)});
            }
            std::vector<double> radii;
            for (int i = 0; i < r_points; ++i)
                radii.push_back(r_min *
                                std::pow(r_max / r_min,
                                         r_points == 1 ? 0.0
                                                       : static_cast<double>(i) /
                                                             (r_points - 1)));
            const auto report =
                cusploc::bound_checks(sc, pairs, rays, radii, n_value, reps, seed, threads);
            const std::string text = cusploc::to_json(report).dump(2) + "\n";
            write_text(out, text);
            std::cout << text;
            return 0;
        }
    } catch (const cusploc::validation_error& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
