// dgmatch — command-line front end for distance-geometry estimation
// experiments: structure generation, single-cell estimation, full
// matched-vs-mismatched sweeps, and report regeneration.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dgmatch/dgmatch.hpp"

namespace fs = std::filesystem;

namespace {

/// Errors in user-supplied values that CLI11 cannot catch itself; mapped to
/// exit code 1 like any other usage problem.
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FamilySpec {
    dgmatch::NoiseFamily family;
    std::optional<int> nu;
};

/// Parse "gaussian" | "laplace" | "nsst" | "nsst:nu=<int>".
FamilySpec parse_family_spec(const std::string& spec, const char* flag) {
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const auto family = dgmatch::parse_family(head);
    if (!family)
        throw usage_error(std::string(flag) + ": unknown family '" + head + "'");
    FamilySpec out{*family, std::nullopt};
    if (colon == std::string::npos) return out;
    if (*family != dgmatch::NoiseFamily::nsst)
        throw usage_error(std::string(flag) + ": only nsst accepts parameters, got '" + spec + "'");
    const std::string rest = spec.substr(colon + 1);
    if (rest.rfind("nu=", 0) != 0)
        throw usage_error(std::string(flag) + ": expected 'nu=<int>', got '" + rest + "'");
    try {
        std::size_t used = 0;
        const int nu = std::stoi(rest.substr(3), &used);
        if (used != rest.size() - 3) throw std::invalid_argument("trailing characters");
        out.nu = nu;
    } catch (const std::exception&) {
        throw usage_error(std::string(flag) + ": bad nu value in '" + spec + "'");
    }
    if (*out.nu < 3) throw usage_error(std::string(flag) + ": nu must be >= 3");
    return out;
}

struct GenArgs {
    std::string kind;
    int count = 8;
    int n_points = 10;
    std::uint64_t seed = 1;
    std::string out_path;
};

int cmd_gen(const GenArgs& args) {
    dgmatch::Rng rng(args.seed);
    std::vector<dgmatch::PointSet> structures;
    if (args.kind == "triangle") {
        structures = dgmatch::generate_triangles(args.count, rng);
    } else if (args.kind == "cloud") {
        structures = dgmatch::generate_point_clouds(args.count, args.n_points, rng);
    } else {
        throw usage_error("--kind: expected 'triangle' or 'cloud', got '" + args.kind + "'");
    }
    dgmatch::io::save_structures(args.out_path, structures);
    std::cout << "wrote " << structures.size() << " " << args.kind << " structure"
              << (structures.size() == 1 ? "" : "s") << " (" << structures.front().n_points()
              << " points each) to " << args.out_path << "\n";
    return 0;
}

struct EstimateArgs {
    std::string structures_path;
    std::string noise_spec;
    std::string likelihood_spec = "matched";
    double snr_db = 0.0;
    int m = 10;
    std::uint64_t seed = 1;
    std::string out_path;
    std::string dump_measurements_dir;
};

int cmd_estimate(const EstimateArgs& args) {
    const FamilySpec noise = parse_family_spec(args.noise_spec, "--noise");
    if (noise.family == dgmatch::NoiseFamily::gaussian)
        throw usage_error("--noise: true noise must be laplace or nsst");
    FamilySpec likelihood{noise.family, noise.nu};
    if (args.likelihood_spec != "matched")
        likelihood = parse_family_spec(args.likelihood_spec, "--likelihood");
    if (args.m < 1) throw usage_error("--m: must be >= 1");

    const std::vector<dgmatch::PointSet> structures =
        dgmatch::io::load_structures(args.structures_path);
    if (!args.dump_measurements_dir.empty())
        fs::create_directories(args.dump_measurements_dir);

    dgmatch::SweepResult result;
    for (const dgmatch::PointSet& truth : structures) {
        const double sigma_x = dgmatch::mean_edge_length(truth);
        const double sigma2 = dgmatch::snr_to_sigma2({args.snr_db, sigma_x});
        const dgmatch::NoiseModel true_model = dgmatch::model_from_target_variance(
            noise.family, sigma2, noise.nu.has_value() ? noise.nu : std::optional<int>(3));
        const dgmatch::NoiseModel lik_model = dgmatch::model_from_target_variance(
            likelihood.family, sigma2,
            likelihood.nu.has_value() ? likelihood.nu : std::optional<int>(3));

        dgmatch::Rng meas_rng(dgmatch::cell_seed(args.seed, truth.id, noise.family, 0, 0, 0,
                                                 dgmatch::StreamKind::measurements));
        const dgmatch::MeasurementSet meas =
            dgmatch::simulate_measurements(truth, true_model, args.m, meas_rng);
        if (!args.dump_measurements_dir.empty())
            dgmatch::io::save_measurements(
                fs::path(args.dump_measurements_dir) / (truth.id + ".measurements.json"), meas);

        dgmatch::Rng opt_rng(dgmatch::cell_seed(args.seed, truth.id, noise.family, 0, 0, 0,
                                                dgmatch::StreamKind::optimizer));
        const dgmatch::EstimateResult est =
            dgmatch::estimate(meas, dgmatch::likelihood_spec(lik_model), truth.n_points(),
                              truth.dim, dgmatch::OptimizerSettings{}, opt_rng);
        const dgmatch::AlignmentResult align = dgmatch::opp_align(est.estimate, truth);

        dgmatch::SweepRecord rec;
        rec.structure_id = truth.id;
        rec.noise_family = noise.family;
        rec.likelihood_family = likelihood.family;
        rec.snr_db = args.snr_db;
        rec.m = args.m;
        rec.repeat_index = 0;
        rec.opp_loss = align.opp_loss;
        rec.final_nll = est.final_nll;
        rec.converged = est.converged;
        rec.restart_index = est.restart_index;
        result.records.push_back(std::move(rec));
    }

    dgmatch::io::write_results_csv(fs::path(args.out_path), result);
    std::cout << "estimated " << result.records.size() << " structure"
              << (result.records.size() == 1 ? "" : "s") << " ("
              << dgmatch::family_name(noise.family) << " noise, "
              << dgmatch::family_name(likelihood.family) << " likelihood, snr " << args.snr_db
              << " dB, m " << args.m << ") -> " << args.out_path << "\n";
    return 0;
}

struct SweepArgs {
    std::string config_path;
    std::string out_dir;
    int workers = 1;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> repeats_override;
};

int cmd_sweep(const SweepArgs& args) {
    dgmatch::SweepConfig config = dgmatch::io::load_sweep_config(args.config_path);
    if (args.seed_override) config.seed = *args.seed_override;
    if (args.repeats_override) config.repeats = *args.repeats_override;
    if (args.workers < 1) throw usage_error("--workers: must be >= 1");

    const dgmatch::SweepResult result = dgmatch::run_sweep(
        config, args.workers, [](std::size_t done, std::size_t total) {
            std::cerr << "cell " << done << "/" << total << " done\n";
        });
    const dgmatch::SummaryTable table = dgmatch::summarize(result);

    fs::create_directories(args.out_dir);
    dgmatch::io::write_results_csv(fs::path(args.out_dir) / "results.csv", result);
    dgmatch::io::write_report_files(args.out_dir, result, table);
    std::cout << "sweep wrote " << result.records.size() << " records to " << args.out_dir
              << "\n";
    return 0;
}

struct ReportArgs {
    std::string results_path;
    std::string out_dir;
};

int cmd_report(const ReportArgs& args) {
    const dgmatch::SweepResult result = dgmatch::io::read_results_csv(args.results_path);
    const dgmatch::SummaryTable table = dgmatch::summarize(result);
    dgmatch::io::write_report_files(args.out_dir, result, table);
    std::cout << "report regenerated from " << result.records.size() << " records into "
              << args.out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distance-geometry estimation with matched and mismatched likelihoods"};
    app.require_subcommand(1);

    GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "Generate random ground-truth structures");
    gen_cmd->add_option("--kind", gen.kind, "Structure kind: triangle or cloud")->required();
    gen_cmd->add_option("--count", gen.count, "Number of structures")->required();
    gen_cmd->add_option("--n-points", gen.n_points, "Points per cloud structure (cloud only)");
    gen_cmd->add_option("--seed", gen.seed, "Generator seed");
    gen_cmd->add_option("--out", gen.out_path, "Output structures JSON path")->required();

    EstimateArgs est;
    CLI::App* est_cmd =
        app.add_subcommand("estimate", "Single-cell estimation over a structure file");
    est_cmd->add_option("--structures", est.structures_path, "Structures JSON path")->required();
    est_cmd->add_option("--noise", est.noise_spec,
                        "True noise family: laplace, nsst, or nsst:nu=<int>")
        ->required();
    est_cmd->add_option("--likelihood", est.likelihood_spec,
                        "Likelihood family (same forms, gaussian allowed) or 'matched'");
    est_cmd->add_option("--snr-db", est.snr_db, "Signal-to-noise ratio in dB")->required();
    est_cmd->add_option("--m", est.m, "Measurements per edge")->required();
    est_cmd->add_option("--seed", est.seed, "Master seed");
    est_cmd->add_option("--out", est.out_path, "Output CSV path")->required();
    est_cmd->add_option("--dump-measurements", est.dump_measurements_dir,
                        "Directory for per-structure measurement JSON files");

    SweepArgs sweep;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run a full matched-vs-mismatched sweep");
    sweep_cmd->add_option("--config", sweep.config_path, "Sweep config JSON path")->required();
    sweep_cmd->add_option("--out-dir", sweep.out_dir, "Output directory")->required();
    sweep_cmd->add_option("--workers", sweep.workers, "Parallel worker threads");
    sweep_cmd->add_option("--seed", sweep.seed_override, "Override the config seed");
    sweep_cmd->add_option("--repeats", sweep.repeats_override, "Override the config repeat count");

    ReportArgs report;
    CLI::App* report_cmd =
        app.add_subcommand("report", "Regenerate summaries from an existing results CSV");
    report_cmd->add_option("--results", report.results_path, "Results CSV path")->required();
    report_cmd->add_option("--out-dir", report.out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        if (app.got_subcommand(gen_cmd)) return cmd_gen(gen);
        if (app.got_subcommand(est_cmd)) return cmd_estimate(est);
        if (app.got_subcommand(sweep_cmd)) return cmd_sweep(sweep);
        if (app.got_subcommand(report_cmd)) return cmd_report(report);
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const dgmatch::io::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
