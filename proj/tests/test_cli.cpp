#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dgmatch/io.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string out;
    std::string err;
};

fs::path temp_dir() {
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path() /
                         ("dgmatch-cli-test-" + std::to_string(::getpid()) + "-" +
                          std::to_string(++counter));
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void spit(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

RunResult run_cli(const std::string& args) {
    const fs::path dir = temp_dir();
    const fs::path out_file = dir / "stdout.txt";
    const fs::path err_file = dir / "stderr.txt";
    const std::string cmd = std::string(DGMATCH_CLI_PATH) + " " + args + " >" +
                            out_file.string() + " 2>" + err_file.string();
    const int status = std::system(cmd.c_str());
    int exit_code = -1;
    if (WIFEXITED(status)) exit_code = WEXITSTATUS(status);
    return {exit_code, slurp(out_file), slurp(err_file)};
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("help exits 0 and documents every subcommand") {
    const RunResult top = run_cli("--help");
    CHECK(top.exit_code == 0);
    for (const char* sub : {"gen", "estimate", "sweep", "report"})
        CHECK(top.out.find(sub) != std::string::npos);
    for (const char* sub : {"gen", "estimate", "sweep", "report"}) {
        const RunResult help = run_cli(std::string(sub) + " --help");
        CHECK(help.exit_code == 0);
        CHECK(help.out.find("--") != std::string::npos);
    }
    CHECK(run_cli("gen --help").out.find("--out") != std::string::npos);
    CHECK(run_cli("sweep --help").out.find("--workers") != std::string::npos);
}

TEST_CASE("gen writes structure files and is idempotent") {
    const fs::path dir = temp_dir();
    const fs::path out = dir / "tris.json";
    const RunResult gen =
        run_cli("gen --kind triangle --count 8 --seed 1 --out " + out.string());
    CHECK(gen.exit_code == 0);
    CHECK(gen.out.find("8") != std::string::npos);

    const auto tris = dgmatch::io::load_structures(out);
    REQUIRE(tris.size() == 8);
    for (const auto& tri : tris) CHECK(tri.n_points() == 3);

    const fs::path out2 = dir / "tris2.json";
    run_cli("gen --kind triangle --count 8 --seed 1 --out " + out2.string());
    CHECK(slurp(out) == slurp(out2));

    const fs::path clouds = dir / "clouds.json";
    const RunResult gen_clouds =
        run_cli("gen --kind cloud --count 30 --n-points 10 --seed 2 --out " + clouds.string());
    CHECK(gen_clouds.exit_code == 0);
    const auto cloud_sets = dgmatch::io::load_structures(clouds);
    REQUIRE(cloud_sets.size() == 30);
    CHECK(cloud_sets[0].n_points() == 10);
}

TEST_CASE("gen usage errors exit 1") {
    CHECK(run_cli("gen --kind triangle --count 8 --seed 1").exit_code == 1); // missing --out
    const fs::path dir = temp_dir();
    const RunResult bad_kind =
        run_cli("gen --kind hexagon --count 2 --seed 1 --out " + (dir / "x.json").string());
    CHECK(bad_kind.exit_code == 1);
    CHECK(bad_kind.err.find("hexagon") != std::string::npos);
}

TEST_CASE("gen runtime errors exit 2") {
    const RunResult unwritable =
        run_cli("gen --kind triangle --count 2 --seed 1 --out /nonexistent-dir/x.json");
    CHECK(unwritable.exit_code == 2);
    CHECK(!unwritable.err.empty());
}

TEST_CASE("estimate runs a single cell") {
    const fs::path dir = temp_dir();
    const fs::path tris = dir / "tris.json";
    run_cli("gen --kind triangle --count 2 --seed 3 --out " + tris.string());

    const fs::path out = dir / "losses.csv";
    const fs::path meas_dir = dir / "meas";
    const RunResult est = run_cli("estimate --structures " + tris.string() +
                                  " --noise laplace --likelihood gaussian --snr-db 10 --m 10"
                                  " --seed 4 --out " + out.string() +
                                  " --dump-measurements " + meas_dir.string());
    CHECK(est.exit_code == 0);

    const auto records = dgmatch::io::read_results_csv(out);
    REQUIRE(records.records.size() == 2);
    for (const auto& rec : records.records) {
        CHECK(rec.noise_family == dgmatch::NoiseFamily::laplace);
        CHECK(rec.likelihood_family == dgmatch::NoiseFamily::gaussian);
        CHECK(rec.m == 10);
    }

    // Dumped measurements follow the measurement file schema.
    const auto meas = dgmatch::io::load_measurements(meas_dir / "tri-00.measurements.json");
    CHECK(meas.structure_id == "tri-00");
    CHECK(meas.m_per_edge == 10);
}

TEST_CASE("estimate with --likelihood matched copies the noise family") {
    const fs::path dir = temp_dir();
    const fs::path tris = dir / "tris.json";
    run_cli("gen --kind triangle --count 1 --seed 5 --out " + tris.string());
    const fs::path out = dir / "losses.csv";
    const RunResult est = run_cli("estimate --structures " + tris.string() +
                                  " --noise nsst:nu=5 --likelihood matched --snr-db 15 --m 5"
                                  " --seed 6 --out " + out.string());
    CHECK(est.exit_code == 0);
    const auto records = dgmatch::io::read_results_csv(out);
    CHECK(records.records[0].likelihood_family == dgmatch::NoiseFamily::nsst);
}

TEST_CASE("estimate usage errors exit 1 and name the offending token") {
    const fs::path dir = temp_dir();
    const fs::path tris = dir / "tris.json";
    run_cli("gen --kind triangle --count 1 --seed 5 --out " + tris.string());
    const std::string base = "estimate --structures " + tris.string() + " --m 5 --seed 1 --out " +
                             (dir / "o.csv").string();

    const RunResult bad_snr = run_cli(base + " --noise laplace --snr-db abc");
    CHECK(bad_snr.exit_code == 1);

    const RunResult bad_noise = run_cli(base + " --noise weibull --snr-db 5");
    CHECK(bad_noise.exit_code == 1);
    CHECK(bad_noise.err.find("weibull") != std::string::npos);

    const RunResult bad_lik = run_cli(base + " --noise laplace --likelihood nsst:nu=x --snr-db 5");
    CHECK(bad_lik.exit_code == 1);
    CHECK(bad_lik.err.find("nu") != std::string::npos);
}

TEST_CASE("sweep and report cooperate and are worker-count independent") {
    const fs::path dir = temp_dir();
    const fs::path tris = dir / "tris.json";
    run_cli("gen --kind triangle --count 2 --seed 7 --out " + tris.string());

    spit(dir / "config.json", R"({
        "structures": "tris.json",
        "noise_families": ["laplace"],
        "snr_grid_db": [5, 10],
        "m_values": [5],
        "repeats": 3,
        "seed": 99,
        "optimizer": {"restarts": 2}
    })");

    const fs::path out1 = dir / "run1";
    const fs::path out2 = dir / "run2";
    const RunResult sweep1 = run_cli("sweep --config " + (dir / "config.json").string() +
                                     " --out-dir " + out1.string() + " --workers 1");
    CHECK(sweep1.exit_code == 0);
    CHECK(!sweep1.err.empty()); // progress goes to stderr
    const RunResult sweep2 = run_cli("sweep --config " + (dir / "config.json").string() +
                                     " --out-dir " + out2.string() + " --workers 2");
    CHECK(sweep2.exit_code == 0);

    CHECK(slurp(out1 / "results.csv") == slurp(out2 / "results.csv"));
    CHECK(slurp(out1 / "summary.csv") == slurp(out2 / "summary.csv"));
    CHECK(slurp(out1 / "summary_pairwise.csv") == slurp(out2 / "summary_pairwise.csv"));
    CHECK(slurp(out1 / "plotdata.tsv") == slurp(out2 / "plotdata.tsv"));

    // report(sweep results) reproduces the sweep's own summaries byte for byte.
    const fs::path rep = dir / "rep";
    const RunResult report = run_cli("report --results " + (out1 / "results.csv").string() +
                                     " --out-dir " + rep.string());
    CHECK(report.exit_code == 0);
    CHECK(slurp(rep / "summary.csv") == slurp(out1 / "summary.csv"));
    CHECK(slurp(rep / "summary_pairwise.csv") == slurp(out1 / "summary_pairwise.csv"));
    CHECK(slurp(rep / "plotdata.tsv") == slurp(out1 / "plotdata.tsv"));
}

TEST_CASE("sweep config errors exit 1") {
    const fs::path dir = temp_dir();
    const fs::path tris = dir / "tris.json";
    run_cli("gen --kind triangle --count 1 --seed 7 --out " + tris.string());

    spit(dir / "bad.json", R"({
        "structures": "tris.json",
        "noise_families": ["laplace"],
        "snr_grid_db": [5],
        "m_values": [5],
        "repeats": 1,
        "seed": 1,
        "mystery_knob": true
    })");
    const RunResult bad = run_cli("sweep --config " + (dir / "bad.json").string() +
                                  " --out-dir " + (dir / "out").string());
    CHECK(bad.exit_code == 1);
    CHECK(bad.err.find("mystery_knob") != std::string::npos);

    spit(dir / "empty_grid.json", R"({
        "structures": "tris.json",
        "noise_families": ["laplace"],
        "snr_grid_db": [],
        "m_values": [5],
        "repeats": 1,
        "seed": 1
    })");
    CHECK(run_cli("sweep --config " + (dir / "empty_grid.json").string() + " --out-dir " +
                  (dir / "out2").string())
              .exit_code == 1);
}

TEST_CASE("report errors on malformed results exit 2 with a line number") {
    const fs::path dir = temp_dir();
    spit(dir / "truncated.csv",
         std::string(dgmatch::io::kResultsHeader) + "\ntri-00,laplace,gaussian,5,10\n");
    const RunResult report = run_cli("report --results " + (dir / "truncated.csv").string() +
                                     " --out-dir " + (dir / "out").string());
    CHECK(report.exit_code == 2);
    CHECK(report.err.find(":2") != std::string::npos);
}

} // TEST_SUITE
