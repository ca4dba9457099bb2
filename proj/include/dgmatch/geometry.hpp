#ifndef DGMATCH_GEOMETRY_HPP
#define DGMATCH_GEOMETRY_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgmatch {

/// A configuration of N points in K-dimensional Euclidean space.
///
/// Coordinates live in one flat row-major buffer (point n occupies
/// [n*dim, (n+1)*dim)); the optimizer treats the whole buffer as a single
/// parameter vector, so every module shares this representation.
struct PointSet {
    std::string id;
    int dim = 0;
    std::vector<double> coords;

    int n_points() const {
        return dim > 0 ? static_cast<int>(coords.size()) / dim : 0;
    }

    double& at(int point, int axis) { return coords[static_cast<std::size_t>(point) * dim + axis]; }
    double at(int point, int axis) const { return coords[static_cast<std::size_t>(point) * dim + axis]; }

    std::span<const double> point(int n) const {
        return {coords.data() + static_cast<std::size_t>(n) * dim, static_cast<std::size_t>(dim)};
    }
};

/// Index pair (i, j), 1-based with i < j, identifying one edge of the
/// complete graph. Point numbering follows the usual 1..N convention of
/// the measurement file format.
struct Edge {
    int i = 0;
    int j = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
};

using EdgeSet = std::vector<Edge>;

/// Edge lengths in the canonical lexicographic edge order of edge_set().
using EdgeLengths = std::vector<double>;

inline void validate_point_set(const PointSet& ps) {
    if (ps.dim < 1) throw std::invalid_argument("point set: dimension must be >= 1");
    if (ps.coords.size() % static_cast<std::size_t>(ps.dim) != 0)
        throw std::invalid_argument("point set: coordinate buffer not a multiple of dim");
    if (ps.n_points() < 2) throw std::invalid_argument("point set: need at least 2 points");
    for (double c : ps.coords)
        if (!std::isfinite(c)) throw std::invalid_argument("point set: non-finite coordinate");
}

inline int edge_count(int n_points) { return n_points * (n_points - 1) / 2; }

/// All edges (i, j) with i < j over points 1..n, in lexicographic order.
/// This order is fixed; measurements and edge lengths are indexed by it.
inline EdgeSet edge_set(int n_points) {
    if (n_points < 2) throw std::invalid_argument("edge_set: need at least 2 points");
    EdgeSet edges;
    edges.reserve(static_cast<std::size_t>(edge_count(n_points)));
    for (int i = 1; i < n_points; ++i)
        for (int j = i + 1; j <= n_points; ++j)
            edges.push_back({i, j});
    return edges;
}

inline double point_distance(const PointSet& ps, int i, int j) {
    double acc = 0.0;
    for (int k = 0; k < ps.dim; ++k) {
        const double delta = ps.at(i, k) - ps.at(j, k);
        acc += delta * delta;
    }
    return std::sqrt(acc);
}

/// Euclidean length of every edge, in edge_set() order.
inline EdgeLengths edge_lengths(const PointSet& ps) {
    validate_point_set(ps);
    const int n = ps.n_points();
    EdgeLengths lengths;
    lengths.reserve(static_cast<std::size_t>(edge_count(n)));
    for (int i = 0; i < n - 1; ++i)
        for (int j = i + 1; j < n; ++j)
            lengths.push_back(point_distance(ps, i, j));
    return lengths;
}

/// Arithmetic mean of all N(N-1)/2 edge lengths; the structure scale that
/// anchors the SNR definition.
inline double mean_edge_length(const PointSet& ps) {
    const EdgeLengths lengths = edge_lengths(ps);
    double acc = 0.0;
    for (double d : lengths) acc += d;
    return acc / static_cast<double>(lengths.size());
}

/// Translate the configuration so the centroid sits at the origin.
/// Centroid subtraction; pairwise distances are unchanged.
inline PointSet center(const PointSet& ps) {
    validate_point_set(ps);
    const int n = ps.n_points();
    std::vector<double> centroid(static_cast<std::size_t>(ps.dim), 0.0);
    for (int p = 0; p < n; ++p)
        for (int k = 0; k < ps.dim; ++k)
            centroid[static_cast<std::size_t>(k)] += ps.at(p, k);
    for (double& c : centroid) c /= static_cast<double>(n);

    PointSet out = ps;
    for (int p = 0; p < n; ++p)
        for (int k = 0; k < ps.dim; ++k)
            out.at(p, k) -= centroid[static_cast<std::size_t>(k)];
    return out;
}

} // namespace dgmatch

#endif // DGMATCH_GEOMETRY_HPP
