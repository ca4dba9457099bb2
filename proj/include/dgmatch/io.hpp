#ifndef DGMATCH_IO_HPP
#define DGMATCH_IO_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dgmatch/geometry.hpp"
#include "dgmatch/likelihood.hpp"
#include "dgmatch/noise.hpp"
#include "dgmatch/stats.hpp"
#include "dgmatch/sweep.hpp"

namespace dgmatch::io {

/// Config-file problems are usage errors (CLI exit code 1), unlike broken
/// data files which surface as plain runtime errors (exit code 2).
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

namespace detail {

/// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double_shortest(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, p};
}

/// Fixed 17-significant-digit form used by the CSV outputs.
inline std::string format_double_g17(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return {buf, p};
}

inline double parse_double(std::string_view token, const std::string& context) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || p != token.data() + token.size())
        throw std::runtime_error(context + ": bad number '" + std::string(token) + "'");
    return v;
}

inline long parse_long(std::string_view token, const std::string& context) {
    long v = 0;
    auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || p != token.data() + token.size())
        throw std::runtime_error(context + ": bad integer '" + std::string(token) + "'");
    return v;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    return in;
}

inline void reject_unknown_keys(const nlohmann::json& obj,
                                std::initializer_list<std::string_view> known,
                                const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (std::string_view k : known) ok |= (key == k);
        if (!ok) throw config_error(where + ": unknown key '" + key + "'");
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Structure files: JSON array of { "id", "dim", "points" }

inline nlohmann::json structures_to_json(const std::vector<PointSet>& structures) {
    nlohmann::json arr = nlohmann::json::array();
    for (const PointSet& ps : structures) {
        nlohmann::json points = nlohmann::json::array();
        for (int p = 0; p < ps.n_points(); ++p) {
            nlohmann::json row = nlohmann::json::array();
            for (int k = 0; k < ps.dim; ++k) row.push_back(ps.at(p, k));
            points.push_back(std::move(row));
        }
        arr.push_back({{"id", ps.id}, {"dim", ps.dim}, {"points", std::move(points)}});
    }
    return arr;
}

inline std::vector<PointSet> structures_from_json(const nlohmann::json& arr) {
    if (!arr.is_array()) throw std::runtime_error("structure file: top level must be an array");
    std::vector<PointSet> out;
    for (const nlohmann::json& item : arr) {
        PointSet ps;
        ps.id = item.at("id").get<std::string>();
        ps.dim = item.at("dim").get<int>();
        const nlohmann::json& points = item.at("points");
        for (const nlohmann::json& row : points) {
            if (static_cast<int>(row.size()) != ps.dim)
                throw std::runtime_error("structure file: point dimension mismatch in '" + ps.id + "'");
            for (const nlohmann::json& c : row) ps.coords.push_back(c.get<double>());
        }
        validate_point_set(ps);
        out.push_back(std::move(ps));
    }
    return out;
}

inline void save_structures(const std::filesystem::path& path,
                            const std::vector<PointSet>& structures) {
    auto out = detail::open_out(path);
    out << structures_to_json(structures).dump(2) << '\n';
}

inline std::vector<PointSet> load_structures(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    nlohmann::json parsed;
    in >> parsed;
    return structures_from_json(parsed);
}

// ---------------------------------------------------------------------------
// Measurement files: { "structure_id", "m", "edges": [{ "i", "j", "values" }] }

inline nlohmann::json measurements_to_json(const MeasurementSet& meas) {
    validate_measurement_set(meas);
    nlohmann::json edges = nlohmann::json::array();
    const EdgeSet es = edge_set(meas.n_points);
    for (std::size_t e = 0; e < es.size(); ++e) {
        nlohmann::json values = nlohmann::json::array();
        for (double v : meas.edge_values(static_cast<int>(e))) values.push_back(v);
        edges.push_back({{"i", es[e].i}, {"j", es[e].j}, {"values", std::move(values)}});
    }
    return {{"structure_id", meas.structure_id}, {"m", meas.m_per_edge}, {"edges", std::move(edges)}};
}

inline MeasurementSet measurements_from_json(const nlohmann::json& obj) {
    MeasurementSet meas;
    meas.structure_id = obj.at("structure_id").get<std::string>();
    meas.m_per_edge = obj.at("m").get<int>();
    const nlohmann::json& edges = obj.at("edges");
    if (!edges.is_array() || edges.empty())
        throw std::runtime_error("measurement file: edges must be a nonempty array");

    // Edge count determines N: |E| = N(N-1)/2.
    const std::size_t n_edges = edges.size();
    int n = 2;
    while (static_cast<std::size_t>(edge_count(n)) < n_edges) ++n;
    if (static_cast<std::size_t>(edge_count(n)) != n_edges)
        throw std::runtime_error("measurement file: edge count is not a complete graph");
    meas.n_points = n;

    const EdgeSet expected = edge_set(n);
    for (std::size_t e = 0; e < n_edges; ++e) {
        const nlohmann::json& edge = edges[e];
        if (edge.at("i").get<int>() != expected[e].i || edge.at("j").get<int>() != expected[e].j)
            throw std::runtime_error("measurement file: edges must be complete and in lexicographic order");
        const nlohmann::json& values = edge.at("values");
        if (static_cast<int>(values.size()) != meas.m_per_edge)
            throw std::runtime_error("measurement file: edge value count differs from m");
        for (const nlohmann::json& v : values) meas.values.push_back(v.get<double>());
    }
    validate_measurement_set(meas);
    return meas;
}

inline void save_measurements(const std::filesystem::path& path, const MeasurementSet& meas) {
    auto out = detail::open_out(path);
    out << measurements_to_json(meas).dump(2) << '\n';
}

inline MeasurementSet load_measurements(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    nlohmann::json parsed;
    in >> parsed;
    return measurements_from_json(parsed);
}

// ---------------------------------------------------------------------------
// Sweep config: JSON mirror of SweepConfig; unknown keys rejected.

namespace detail {

inline std::vector<PointSet> resolve_structure_ref(const std::string& ref,
                                                   const std::filesystem::path& base_dir) {
    const auto hash = ref.find('#');
    const std::string file = ref.substr(0, hash);
    std::filesystem::path path(file);
    if (path.is_relative()) path = base_dir / path;
    std::vector<PointSet> all = load_structures(path);
    if (hash == std::string::npos) return all;
    const std::string id = ref.substr(hash + 1);
    for (PointSet& ps : all)
        if (ps.id == id) return {std::move(ps)};
    throw config_error("sweep config: structure id '" + id + "' not found in " + file);
}

} // namespace detail

/// Parse a sweep config file. Relative structure paths resolve against the
/// config file's directory. Unknown keys anywhere are an error.
inline SweepConfig load_sweep_config(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    nlohmann::json obj;
    try {
        in >> obj;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("sweep config: " + std::string(e.what()));
    }
    if (!obj.is_object()) throw config_error("sweep config: top level must be an object");
    detail::reject_unknown_keys(obj,
                                {"structures", "noise_families", "nsst_nu", "snr_grid_db",
                                 "m_values", "repeats", "likelihood_mode", "seed", "optimizer"},
                                "sweep config");

    SweepConfig config;
    try {
        const std::filesystem::path base_dir = path.has_parent_path()
                                                   ? path.parent_path()
                                                   : std::filesystem::path(".");
        const nlohmann::json& structures = obj.at("structures");
        if (structures.is_string()) {
            config.structures = detail::resolve_structure_ref(structures.get<std::string>(), base_dir);
        } else if (structures.is_array()) {
            for (const nlohmann::json& ref : structures) {
                auto resolved = detail::resolve_structure_ref(ref.get<std::string>(), base_dir);
                for (PointSet& ps : resolved) config.structures.push_back(std::move(ps));
            }
        } else {
            throw config_error("sweep config: 'structures' must be a path or list of references");
        }

        for (const nlohmann::json& name : obj.at("noise_families")) {
            const auto family = parse_family(name.get<std::string>());
            if (!family)
                throw config_error("sweep config: unknown noise family '" +
                                   name.get<std::string>() + "'");
            config.noise_families.push_back(*family);
        }
        if (obj.contains("nsst_nu")) config.nsst_nu = obj.at("nsst_nu").get<int>();
        for (const nlohmann::json& v : obj.at("snr_grid_db"))
            config.snr_grid_db.push_back(v.get<double>());
        for (const nlohmann::json& v : obj.at("m_values")) config.m_values.push_back(v.get<int>());
        config.repeats = obj.at("repeats").get<int>();
        config.seed = obj.at("seed").get<std::uint64_t>();

        if (obj.contains("likelihood_mode")) {
            // Always both; the key is accepted so configs can state it explicitly.
            bool matched = false, mismatched = false;
            for (const nlohmann::json& v : obj.at("likelihood_mode")) {
                const std::string mode = v.get<std::string>();
                if (mode == "matched") matched = true;
                else if (mode == "mismatched-gaussian") mismatched = true;
                else throw config_error("sweep config: unknown likelihood mode '" + mode + "'");
            }
            if (!matched || !mismatched)
                throw config_error(
                    "sweep config: likelihood_mode must include both 'matched' and "
                    "'mismatched-gaussian'");
        }

        if (obj.contains("optimizer")) {
            const nlohmann::json& opt = obj.at("optimizer");
            detail::reject_unknown_keys(opt,
                                        {"max_iterations", "grad_tolerance", "step_tolerance",
                                         "history_size", "restarts", "init_scale"},
                                        "sweep config optimizer");
            if (opt.contains("max_iterations"))
                config.optimizer.max_iterations = opt.at("max_iterations").get<int>();
            if (opt.contains("grad_tolerance"))
                config.optimizer.grad_tolerance = opt.at("grad_tolerance").get<double>();
            if (opt.contains("step_tolerance"))
                config.optimizer.step_tolerance = opt.at("step_tolerance").get<double>();
            if (opt.contains("history_size"))
                config.optimizer.history_size = opt.at("history_size").get<int>();
            if (opt.contains("restarts")) config.optimizer.restarts = opt.at("restarts").get<int>();
            if (opt.contains("init_scale"))
                config.optimizer.init_scale = opt.at("init_scale").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw config_error("sweep config: " + std::string(e.what()));
    }

    try {
        validate_sweep_config(config);
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
    return config;
}

// ---------------------------------------------------------------------------
// Results CSV

inline constexpr std::string_view kResultsHeader =
    "structure_id,noise_family,likelihood_family,snr_db,m,repeat,opp_loss,final_nll,"
    "converged,restart_index";

namespace detail {

inline const std::string& csv_safe(const std::string& id) {
    if (id.find_first_of(",\r\n") != std::string::npos)
        throw std::runtime_error("structure id '" + id + "' cannot be written to CSV");
    return id;
}

} // namespace detail

inline void write_results_csv(std::ostream& out, const SweepResult& result) {
    out << kResultsHeader << '\n';
    for (const SweepRecord& rec : result.records) {
        out << detail::csv_safe(rec.structure_id) << ',' << family_name(rec.noise_family) << ','
            << family_name(rec.likelihood_family) << ',' << detail::format_double_g17(rec.snr_db)
            << ',' << rec.m << ',' << rec.repeat_index << ','
            << detail::format_double_g17(rec.opp_loss) << ','
            << detail::format_double_g17(rec.final_nll) << ',' << (rec.converged ? 1 : 0) << ','
            << rec.restart_index << '\n';
    }
}

inline void write_results_csv(const std::filesystem::path& path, const SweepResult& result) {
    auto out = detail::open_out(path);
    write_results_csv(out, result);
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return fields;
}

} // namespace detail

/// Parse a results CSV produced by write_results_csv. Errors carry the
/// 1-based line number of the offending row.
inline SweepResult read_results_csv(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path.string() + ": empty results file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kResultsHeader)
        throw std::runtime_error(path.string() + ":1: unexpected results header");

    SweepResult result;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string context = path.string() + ":" + std::to_string(line_no);
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 10)
            throw std::runtime_error(context + ": expected 10 fields, got " +
                                     std::to_string(fields.size()));
        SweepRecord rec;
        rec.structure_id = std::string(fields[0]);
        const auto noise = parse_family(fields[1]);
        const auto lik = parse_family(fields[2]);
        if (!noise || !lik) throw std::runtime_error(context + ": unknown family name");
        rec.noise_family = *noise;
        rec.likelihood_family = *lik;
        rec.snr_db = detail::parse_double(fields[3], context);
        rec.m = static_cast<int>(detail::parse_long(fields[4], context));
        rec.repeat_index = static_cast<int>(detail::parse_long(fields[5], context));
        rec.opp_loss = detail::parse_double(fields[6], context);
        rec.final_nll = detail::parse_double(fields[7], context);
        const long conv = detail::parse_long(fields[8], context);
        if (conv != 0 && conv != 1)
            throw std::runtime_error(context + ": converged must be 0 or 1");
        rec.converged = conv == 1;
        rec.restart_index = static_cast<int>(detail::parse_long(fields[9], context));
        result.records.push_back(std::move(rec));
    }
    if (result.records.empty())
        throw std::runtime_error(path.string() + ": no records");
    return result;
}

// ---------------------------------------------------------------------------
// Summary CSVs and plot data

inline constexpr std::string_view kSummaryHeader =
    "structure_id,noise_family,snr_db,m,p10,p25,p50,p75,p90,likelihood_family";

inline void write_summary_csv(std::ostream& out, const SummaryTable& table) {
    out << kSummaryHeader << '\n';
    for (const SummaryCell& cell : table.cells) {
        out << detail::csv_safe(cell.structure_id) << ',' << family_name(cell.noise_family) << ','
            << detail::format_double_g17(cell.snr_db) << ',' << cell.m << ','
            << detail::format_double_g17(cell.loss.p10) << ','
            << detail::format_double_g17(cell.loss.p25) << ','
            << detail::format_double_g17(cell.loss.p50) << ','
            << detail::format_double_g17(cell.loss.p75) << ','
            << detail::format_double_g17(cell.loss.p90) << ','
            << family_name(cell.likelihood_family) << '\n';
    }
}

inline constexpr std::string_view kPairwiseHeader =
    "structure_id,noise_family,snr_db,m,diff_p10,diff_p25,diff_p50,diff_p75,diff_p90";

inline void write_pairwise_csv(std::ostream& out, const SummaryTable& table) {
    out << kPairwiseHeader << '\n';
    for (const PairwiseCell& cell : table.pairwise) {
        out << detail::csv_safe(cell.structure_id) << ',' << family_name(cell.noise_family) << ','
            << detail::format_double_g17(cell.snr_db) << ',' << cell.m << ','
            << detail::format_double_g17(cell.diff.p10) << ','
            << detail::format_double_g17(cell.diff.p25) << ','
            << detail::format_double_g17(cell.diff.p50) << ','
            << detail::format_double_g17(cell.diff.p75) << ','
            << detail::format_double_g17(cell.diff.p90) << '\n';
    }
}

namespace detail {

struct PlotKey {
    int noise_family;
    int m;
    friend auto operator<=>(const PlotKey&, const PlotKey&) = default;
};

} // namespace detail

/// Box-plot percentiles pooled over all structures and repeats, one TSV
/// block per (noise family, m): per SNR the matched and mismatched loss
/// percentiles plus the pairwise-difference percentiles, followed by one
/// block per family of medians against m.
inline void write_plot_data(std::ostream& out, const SweepResult& result) {
    // family+m -> snr -> pooled losses / pairwise diffs
    std::map<detail::PlotKey, std::map<double, std::vector<double>>> matched, mismatched, diffs;
    using RepKey = std::tuple<std::string, int, double, int, int>; // structure, family, snr, m, repeat
    std::map<RepKey, double> matched_by_repeat;

    for (const SweepRecord& rec : result.records) {
        const detail::PlotKey pk{static_cast<int>(rec.noise_family), rec.m};
        const bool is_matched = rec.likelihood_family == rec.noise_family;
        (is_matched ? matched : mismatched)[pk][rec.snr_db].push_back(rec.opp_loss);
        if (is_matched) {
            matched_by_repeat[{rec.structure_id, static_cast<int>(rec.noise_family), rec.snr_db,
                               rec.m, rec.repeat_index}] = rec.opp_loss;
        }
    }
    for (const SweepRecord& rec : result.records) {
        if (rec.likelihood_family == rec.noise_family) continue;
        const auto it = matched_by_repeat.find({rec.structure_id, static_cast<int>(rec.noise_family),
                                                rec.snr_db, rec.m, rec.repeat_index});
        if (it != matched_by_repeat.end()) {
            const detail::PlotKey pk{static_cast<int>(rec.noise_family), rec.m};
            diffs[pk][rec.snr_db].push_back(rec.opp_loss - it->second);
        }
    }

    const auto emit_percentiles = [&](std::ostream& os, const Percentiles& p) {
        os << '\t' << detail::format_double_g17(p.p10) << '\t' << detail::format_double_g17(p.p25)
           << '\t' << detail::format_double_g17(p.p50) << '\t' << detail::format_double_g17(p.p75)
           << '\t' << detail::format_double_g17(p.p90);
    };

    for (const auto& [pk, by_snr] : matched) {
        out << "# opp-loss-distribution\tnoise=" << family_name(static_cast<NoiseFamily>(pk.noise_family))
            << "\tm=" << pk.m << '\n';
        out << "snr_db\tmatched_p10\tmatched_p25\tmatched_p50\tmatched_p75\tmatched_p90"
               "\tmismatched_p10\tmismatched_p25\tmismatched_p50\tmismatched_p75\tmismatched_p90"
               "\tdiff_p10\tdiff_p25\tdiff_p50\tdiff_p75\tdiff_p90\n";
        for (const auto& [snr, losses] : by_snr) {
            out << detail::format_double_g17(snr);
            emit_percentiles(out, percentiles(losses));
            emit_percentiles(out, percentiles(mismatched.at(pk).at(snr)));
            emit_percentiles(out, percentiles(diffs.at(pk).at(snr)));
            out << '\n';
        }
        out << '\n';
    }

    // Median loss against m, per family: the sample-size tradeoff view.
    std::map<int, std::map<double, std::map<int, std::pair<std::vector<double>, std::vector<double>>>>>
        by_family; // family -> snr -> m -> (matched, mismatched)
    for (const SweepRecord& rec : result.records) {
        auto& slot = by_family[static_cast<int>(rec.noise_family)][rec.snr_db][rec.m];
        const bool is_matched = rec.likelihood_family == rec.noise_family;
        (is_matched ? slot.first : slot.second).push_back(rec.opp_loss);
    }
    for (const auto& [family, by_snr] : by_family) {
        out << "# median-vs-m\tnoise=" << family_name(static_cast<NoiseFamily>(family)) << '\n';
        out << "snr_db\tm\tmatched_p50\tmismatched_p50\n";
        for (const auto& [snr, by_m] : by_snr) {
            for (const auto& [m, losses] : by_m) {
                out << detail::format_double_g17(snr) << '\t' << m << '\t'
                    << detail::format_double_g17(median(losses.first)) << '\t'
                    << detail::format_double_g17(median(losses.second)) << '\n';
            }
        }
        out << '\n';
    }
}

/// Write the full report bundle for a sweep result into a directory.
inline void write_report_files(const std::filesystem::path& out_dir, const SweepResult& result,
                               const SummaryTable& table) {
    std::filesystem::create_directories(out_dir);
    {
        auto out = detail::open_out(out_dir / "summary.csv");
        write_summary_csv(out, table);
    }
    {
        auto out = detail::open_out(out_dir / "summary_pairwise.csv");
        write_pairwise_csv(out, table);
    }
    {
        auto out = detail::open_out(out_dir / "plotdata.tsv");
        write_plot_data(out, result);
    }
}

} // namespace dgmatch::io

#endif // DGMATCH_IO_HPP
