#ifndef DGMATCH_SWEEP_HPP
#define DGMATCH_SWEEP_HPP

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "dgmatch/estimator.hpp"
#include "dgmatch/geometry.hpp"
#include "dgmatch/likelihood.hpp"
#include "dgmatch/noise.hpp"
#include "dgmatch/procrustes.hpp"
#include "dgmatch/rng.hpp"
#include "dgmatch/stats.hpp"

namespace dgmatch {

// ---------------------------------------------------------------------------
// Structure generation

namespace detail {

inline std::string indexed_id(const char* prefix, int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%02d", prefix, index);
    return buf;
}

/// Smallest inner angle of a triangle, in degrees.
inline double min_triangle_angle_deg(const PointSet& tri) {
    const EdgeLengths len = edge_lengths(tri); // d12, d13, d23
    const double a = len[2]; // opposite vertex 1
    const double b = len[1]; // opposite vertex 2
    const double c = len[0]; // opposite vertex 3
    const auto angle = [](double opposite, double s1, double s2) {
        const double cosv = std::clamp((s1 * s1 + s2 * s2 - opposite * opposite) /
                                           (2.0 * s1 * s2),
                                       -1.0, 1.0);
        return std::acos(cosv) * 180.0 / 3.14159265358979323846;
    };
    return std::min({angle(a, b, c), angle(b, a, c), angle(c, a, b)});
}

} // namespace detail

/// Non-degenerate random triangles in [-1, 1]^2: a candidate is redrawn
/// whole until its smallest inner angle is at least 10 degrees and its
/// shortest edge at least 0.1.
inline std::vector<PointSet> generate_triangles(int count, Rng& rng) {
    if (count < 1) throw std::invalid_argument("generate_triangles: count must be >= 1");
    std::vector<PointSet> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) {
        PointSet tri;
        tri.id = detail::indexed_id("tri", t);
        tri.dim = 2;
        tri.coords.resize(6);
        for (;;) {
            for (double& c : tri.coords) c = rng.uniform(-1.0, 1.0);
            const EdgeLengths len = edge_lengths(tri);
            const double min_edge = std::min({len[0], len[1], len[2]});
            if (min_edge >= 0.1 && detail::min_triangle_angle_deg(tri) >= 10.0) break;
        }
        out.push_back(std::move(tri));
    }
    return out;
}

/// Random point clouds in [-1, 1]^2 with minimum pairwise separation 0.05;
/// each point is redrawn until it clears every already-placed point.
inline std::vector<PointSet> generate_point_clouds(int count, int n_points, Rng& rng) {
    if (count < 1 || n_points < 1)
        throw std::invalid_argument("generate_point_clouds: counts must be >= 1");
    std::vector<PointSet> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int s = 0; s < count; ++s) {
        PointSet cloud;
        cloud.id = detail::indexed_id("cloud", s);
        cloud.dim = 2;
        cloud.coords.reserve(static_cast<std::size_t>(n_points) * 2);
        for (int p = 0; p < n_points; ++p) {
            for (;;) {
                const double x = rng.uniform(-1.0, 1.0);
                const double y = rng.uniform(-1.0, 1.0);
                bool clear = true;
                for (int q = 0; q < p && clear; ++q) {
                    const double dx = x - cloud.coords[static_cast<std::size_t>(q) * 2];
                    const double dy = y - cloud.coords[static_cast<std::size_t>(q) * 2 + 1];
                    clear = std::sqrt(dx * dx + dy * dy) >= 0.05;
                }
                if (clear) {
                    cloud.coords.push_back(x);
                    cloud.coords.push_back(y);
                    break;
                }
            }
        }
        out.push_back(std::move(cloud));
    }
    return out;
}

/// Sample M independent measurements for every edge of the structure.
inline MeasurementSet simulate_measurements(const PointSet& truth, const NoiseModel& model,
                                            int m_per_edge, Rng& rng) {
    validate_point_set(truth);
    if (m_per_edge < 1) throw std::invalid_argument("simulate_measurements: m must be >= 1");
    const EdgeLengths lengths = edge_lengths(truth);
    MeasurementSet meas;
    meas.structure_id = truth.id;
    meas.n_points = truth.n_points();
    meas.m_per_edge = m_per_edge;
    meas.values.reserve(lengths.size() * static_cast<std::size_t>(m_per_edge));
    for (double d : lengths)
        for (int m = 0; m < m_per_edge; ++m) meas.values.push_back(sample(model, d, rng));
    return meas;
}

// ---------------------------------------------------------------------------
// Sweep protocol

struct SweepConfig {
    std::vector<PointSet> structures;
    std::vector<NoiseFamily> noise_families; // subset of {laplace, nsst}
    int nsst_nu = 3;
    std::vector<double> snr_grid_db;
    std::vector<int> m_values;
    int repeats = 100;
    std::uint64_t seed = 0;
    OptimizerSettings optimizer;
};

inline void validate_sweep_config(const SweepConfig& config) {
    if (config.structures.empty()) throw std::invalid_argument("sweep config: no structures");
    for (const PointSet& ps : config.structures) validate_point_set(ps);
    if (config.noise_families.empty())
        throw std::invalid_argument("sweep config: noise_families is empty");
    for (NoiseFamily f : config.noise_families)
        if (f == NoiseFamily::gaussian)
            throw std::invalid_argument(
                "sweep config: noise_families must be a subset of {laplace, nsst}");
    if (config.snr_grid_db.empty()) throw std::invalid_argument("sweep config: snr grid is empty");
    if (config.m_values.empty()) throw std::invalid_argument("sweep config: m_values is empty");
    for (int m : config.m_values)
        if (m < 1) throw std::invalid_argument("sweep config: m values must be >= 1");
    if (config.repeats < 1) throw std::invalid_argument("sweep config: repeats must be >= 1");
    bool has_nsst = false;
    for (NoiseFamily f : config.noise_families) has_nsst |= (f == NoiseFamily::nsst);
    if (has_nsst && config.nsst_nu < 3)
        throw std::invalid_argument("sweep config: nsst_nu must be >= 3");
    validate_optimizer_settings(config.optimizer);
}

struct SweepRecord {
    std::string structure_id;
    NoiseFamily noise_family = NoiseFamily::laplace;
    NoiseFamily likelihood_family = NoiseFamily::laplace;
    double snr_db = 0.0;
    int m = 0;
    int repeat_index = 0;
    double opp_loss = 0.0;
    double final_nll = 0.0;
    bool converged = false;
    int restart_index = 0;
};

struct SweepResult {
    std::vector<SweepRecord> records;
};

enum class StreamKind : std::uint64_t { measurements = 1, optimizer = 2 };

/// Substream seed for one cell of the sweep. Derived by hashing the master
/// seed with the cell tuple, so the stream a cell sees never depends on
/// execution order or worker count. The optimizer stream deliberately omits
/// the likelihood family: matched and mismatched estimation share
/// initializations by construction.
inline std::uint64_t cell_seed(std::uint64_t master, std::string_view structure_id,
                               NoiseFamily noise_family, std::size_t snr_index,
                               std::size_t m_index, int repeat, StreamKind kind) {
    return derive_seed(master, {fnv1a64(structure_id),
                                static_cast<std::uint64_t>(noise_family),
                                static_cast<std::uint64_t>(snr_index),
                                static_cast<std::uint64_t>(m_index),
                                static_cast<std::uint64_t>(repeat),
                                static_cast<std::uint64_t>(kind)});
}

using ProgressFn = std::function<void(std::size_t cells_done, std::size_t cells_total)>;

namespace detail {

struct SweepCell {
    std::size_t structure_index;
    std::size_t family_index;
    std::size_t snr_index;
    std::size_t m_index;
};

/// All records of one (structure, family, snr, m) cell, repeats in order,
/// matched before mismatched within each repeat.
inline std::vector<SweepRecord> run_cell(const SweepConfig& config, const SweepCell& cell) {
    const PointSet& truth = config.structures[cell.structure_index];
    const NoiseFamily family = config.noise_families[cell.family_index];
    const double snr_db = config.snr_grid_db[cell.snr_index];
    const int m = config.m_values[cell.m_index];

    const double sigma_x = mean_edge_length(truth);
    const double sigma2 = snr_to_sigma2({snr_db, sigma_x});
    const NoiseModel true_model = model_from_target_variance(
        family, sigma2, family == NoiseFamily::nsst ? std::optional<int>(config.nsst_nu)
                                                    : std::nullopt);
    const NoiseModel mismatched_model = make_gaussian(sigma2);

    std::vector<SweepRecord> records;
    records.reserve(static_cast<std::size_t>(config.repeats) * 2);

    for (int repeat = 0; repeat < config.repeats; ++repeat) {
        Rng meas_rng(cell_seed(config.seed, truth.id, family, cell.snr_index, cell.m_index,
                               repeat, StreamKind::measurements));
        const MeasurementSet meas = simulate_measurements(truth, true_model, m, meas_rng);

        const std::uint64_t opt_seed = cell_seed(config.seed, truth.id, family, cell.snr_index,
                                                 cell.m_index, repeat, StreamKind::optimizer);

        for (const NoiseModel& lik_model : {true_model, mismatched_model}) {
            Rng opt_rng(opt_seed);
            EstimateResult est;
            try {
                est = estimate(meas, likelihood_spec(lik_model), truth.n_points(), truth.dim,
                               config.optimizer, opt_rng);
            } catch (const degenerate_input_error& e) {
                throw degenerate_input_error(
                    std::string(e.what()) + " [cell structure=" + truth.id +
                    " family=" + std::string(family_name(family)) +
                    " snr_db=" + std::to_string(snr_db) + " m=" + std::to_string(m) +
                    " repeat=" + std::to_string(repeat) + "]");
            }
            const AlignmentResult align = opp_align(est.estimate, truth);

            SweepRecord rec;
            rec.structure_id = truth.id;
            rec.noise_family = family;
            rec.likelihood_family = family_of(lik_model);
            rec.snr_db = snr_db;
            rec.m = m;
            rec.repeat_index = repeat;
            rec.opp_loss = align.opp_loss;
            rec.final_nll = est.final_nll;
            rec.converged = est.converged;
            rec.restart_index = est.restart_index;
            records.push_back(std::move(rec));
        }
    }
    return records;
}

} // namespace detail

/// Run the full matched-vs-mismatched protocol. Every cell derives its own
/// random substreams from the master seed, and per-cell results are placed
/// by cell index, so the record list is identical for any worker count.
inline SweepResult run_sweep(const SweepConfig& config, int workers = 1,
                             const ProgressFn& progress = {}) {
    validate_sweep_config(config);
    if (workers < 1) throw std::invalid_argument("run_sweep: workers must be >= 1");

    std::vector<detail::SweepCell> cells;
    for (std::size_t s = 0; s < config.structures.size(); ++s)
        for (std::size_t f = 0; f < config.noise_families.size(); ++f)
            for (std::size_t snr = 0; snr < config.snr_grid_db.size(); ++snr)
                for (std::size_t m = 0; m < config.m_values.size(); ++m)
                    cells.push_back({s, f, snr, m});

    std::vector<std::vector<SweepRecord>> per_cell(cells.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    std::exception_ptr failure;
    std::mutex failure_mutex;

    const auto worker = [&] {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= cells.size()) return;
            try {
                per_cell[idx] = detail::run_cell(config, cells[idx]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
            const std::size_t completed = done.fetch_add(1) + 1;
            if (progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                progress(completed, cells.size());
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    SweepResult result;
    result.records.reserve(cells.size() * static_cast<std::size_t>(config.repeats) * 2);
    for (std::vector<SweepRecord>& block : per_cell)
        for (SweepRecord& rec : block) result.records.push_back(std::move(rec));
    return result;
}

// ---------------------------------------------------------------------------
// Summaries

struct SummaryCell {
    std::string structure_id;
    NoiseFamily noise_family;
    double snr_db;
    int m;
    NoiseFamily likelihood_family;
    Percentiles loss;
};

/// Distribution of repeat-matched differences (mismatched - matched) for one
/// (structure, noise, snr, m) cell; the median is the headline number.
struct PairwiseCell {
    std::string structure_id;
    NoiseFamily noise_family;
    double snr_db;
    int m;
    Percentiles diff;
};

struct SummaryTable {
    std::vector<SummaryCell> cells;
    std::vector<PairwiseCell> pairwise;
};

/// Per-cell OPP-loss percentiles plus pairwise matched/mismatched
/// differences computed on repeat-index-matched pairs (the two estimates of
/// a pair saw the same simulated measurements).
inline SummaryTable summarize(const SweepResult& result) {
    if (result.records.empty()) throw std::invalid_argument("summarize: no records");

    using LossKey = std::tuple<std::string, int, double, int, int>; // + likelihood
    using PairKey = std::tuple<std::string, int, double, int>;

    std::vector<LossKey> loss_order;
    std::map<LossKey, std::vector<double>> losses;
    std::vector<PairKey> pair_order;
    std::map<PairKey, std::map<int, std::pair<double, double>>> pairs; // repeat -> (matched, mismatched)
    std::map<PairKey, std::map<int, std::pair<bool, bool>>> seen;

    for (const SweepRecord& rec : result.records) {
        const LossKey lk{rec.structure_id, static_cast<int>(rec.noise_family), rec.snr_db,
                         rec.m, static_cast<int>(rec.likelihood_family)};
        auto [it, inserted] = losses.try_emplace(lk);
        if (inserted) loss_order.push_back(lk);
        it->second.push_back(rec.opp_loss);

        const PairKey pk{rec.structure_id, static_cast<int>(rec.noise_family), rec.snr_db, rec.m};
        if (pairs.try_emplace(pk).second) pair_order.push_back(pk);
        const bool matched = rec.likelihood_family == rec.noise_family;
        auto& slot = pairs[pk][rec.repeat_index];
        auto& flag = seen[pk][rec.repeat_index];
        if (matched) {
            slot.first = rec.opp_loss;
            flag.first = true;
        } else {
            slot.second = rec.opp_loss;
            flag.second = true;
        }
    }

    SummaryTable table;
    for (const LossKey& key : loss_order) {
        SummaryCell cell;
        cell.structure_id = std::get<0>(key);
        cell.noise_family = static_cast<NoiseFamily>(std::get<1>(key));
        cell.snr_db = std::get<2>(key);
        cell.m = std::get<3>(key);
        cell.likelihood_family = static_cast<NoiseFamily>(std::get<4>(key));
        cell.loss = percentiles(losses[key]);
        table.cells.push_back(std::move(cell));
    }
    for (const PairKey& key : pair_order) {
        std::vector<double> diffs;
        diffs.reserve(pairs[key].size());
        for (const auto& [repeat, pair] : pairs[key]) {
            const auto& flag = seen[key][repeat];
            if (!flag.first || !flag.second)
                throw std::invalid_argument("summarize: repeat " + std::to_string(repeat) +
                                            " lacks a matched/mismatched pair");
            diffs.push_back(pair.second - pair.first);
        }
        PairwiseCell cell;
        cell.structure_id = std::get<0>(key);
        cell.noise_family = static_cast<NoiseFamily>(std::get<1>(key));
        cell.snr_db = std::get<2>(key);
        cell.m = std::get<3>(key);
        cell.diff = percentiles(std::move(diffs));
        table.pairwise.push_back(std::move(cell));
    }
    return table;
}

} // namespace dgmatch

#endif // DGMATCH_SWEEP_HPP
