#pragma once

// Periodic triangular meshes of a rectangle [0,Lx] x [0,Ly].
//
// Triangles keep their physical (unwrapped) vertex coordinates so that every
// element is an ordinary affine triangle. Periodicity lives entirely in the
// identification maps: boundary copies of a vertex share one canonical index,
// and the two geometric copies of a boundary edge share one global edge.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace meevc {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }

enum class MeshPattern { diagonal, crisscross };

/// Affine map from the reference triangle {(0,0),(1,0),(0,1)} onto a mesh triangle.
struct AffineMap {
    Point origin;
    Eigen::Matrix2d jacobian;
    double det = 0.0;
    Eigen::Matrix2d inverse_transpose;

    Point operator()(Point ref) const {
        return {origin.x + jacobian(0, 0) * ref.x + jacobian(0, 1) * ref.y,
                origin.y + jacobian(1, 0) * ref.x + jacobian(1, 1) * ref.y};
    }
};

/// Globally oriented edge after periodic identification.
struct Edge {
    std::array<int, 2> vertices;  // canonical vertex indices, in global direction
    Point tangent;                // global direction, taken from one geometric copy
};

/// Local edge i of a triangle is opposite local vertex i and runs counter-clockwise,
/// from vertex (i+1)%3 to vertex (i+2)%3. `sign` is +1 when that direction matches
/// the global edge direction.
struct TriangleEdge {
    int edge = -1;
    int sign = 0;
};

class Mesh {
public:
    Mesh() = default;

    /// Builds and validates a periodic mesh; clockwise triangles are reordered.
    Mesh(double lx, double ly, std::vector<Point> vertices, std::vector<std::array<int, 3>> triangles)
        : lx_(lx), ly_(ly), vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
        if (!(lx_ > 0.0) || !(ly_ > 0.0)) throw InvalidArgument("mesh: domain extents must be positive");
        build();
    }

    double lx() const noexcept { return lx_; }
    double ly() const noexcept { return ly_; }
    double area() const noexcept { return lx_ * ly_; }
    double tolerance() const noexcept { return 1e-10 * std::max(lx_, ly_); }

    const std::vector<Point>& vertices() const noexcept { return vertices_; }
    const std::vector<std::array<int, 3>>& triangles() const noexcept { return triangles_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    int num_triangles() const noexcept { return static_cast<int>(triangles_.size()); }
    int num_edges() const noexcept { return static_cast<int>(edges_.size()); }
    /// Number of vertices after periodic identification.
    int num_vertices() const noexcept { return num_canonical_vertices_; }

    /// Physical vertex -> canonical vertex.
    const std::vector<int>& periodic_vertex_map() const noexcept { return vertex_map_; }
    int canonical_vertex(int v) const { return vertex_map_.at(v); }

    /// Per triangle, the three local edges (opposite local vertices 0, 1, 2).
    const std::array<TriangleEdge, 3>& triangle_edges(int t) const { return triangle_edges_.at(t); }

    int euler_characteristic() const noexcept { return num_vertices() - num_edges() + num_triangles(); }

    Point vertex(int t, int local) const { return vertices_[triangles_[t][local]]; }

    double triangle_area(int t) const {
        const Point a = vertex(t, 0), b = vertex(t, 1), c = vertex(t, 2);
        return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    }

    AffineMap affine_map(int t) const {
        if (t < 0 || t >= num_triangles()) throw InvalidArgument("affine_map: triangle index out of range");
        const Point a = vertex(t, 0), b = vertex(t, 1), c = vertex(t, 2);
        AffineMap map;
        map.origin = a;
        map.jacobian << b.x - a.x, c.x - a.x, b.y - a.y, c.y - a.y;
        map.det = map.jacobian.determinant();
        const double scale = std::max({std::abs(b.x - a.x), std::abs(c.x - a.x), std::abs(b.y - a.y), std::abs(c.y - a.y)});
        if (!(map.det > 1e-14 * scale * scale)) throw GeometryError("affine_map: degenerate triangle " + std::to_string(t));
        map.inverse_transpose = map.jacobian.inverse().transpose();
        return map;
    }

private:
    struct CellKey {
        std::int64_t i, j;
        bool operator==(const CellKey& o) const noexcept { return i == o.i && j == o.j; }
    };
    struct CellHash {
        std::size_t operator()(const CellKey& k) const noexcept {
            return std::hash<std::int64_t>()(k.i * 73856093LL ^ k.j * 19349663LL);
        }
    };

    // Points are matched modulo the periods with the absolute tolerance; the
    // spatial hash uses cells much larger than the tolerance so a match can
    // only sit in a neighbouring cell.
    class PeriodicPointSet {
    public:
        PeriodicPointSet(double lx, double ly, double tol) : lx_(lx), ly_(ly), tol_(tol), cell_(1e4 * tol) {}

        /// Returns the id of a stored point within tolerance, or inserts `p` with `new_id`.
        int find_or_insert(Point p, int new_id) {
            const Point w = wrap(p);
            const auto ci = static_cast<std::int64_t>(std::floor(w.x / cell_));
            const auto cj = static_cast<std::int64_t>(std::floor(w.y / cell_));
            const auto ni = static_cast<std::int64_t>(std::floor(lx_ / cell_)) + 1;
            const auto nj = static_cast<std::int64_t>(std::floor(ly_ / cell_)) + 1;
            for (int di = -1; di <= 1; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    const CellKey key{((ci + di) % ni + ni) % ni, ((cj + dj) % nj + nj) % nj};
                    const auto it = cells_.find(key);
                    if (it == cells_.end()) continue;
                    for (const auto& [q, id] : it->second) {
                        if (periodic_distance(w, q) <= tol_) return id;
                    }
                }
            }
            cells_[{ci % ni, cj % nj}].push_back({w, new_id});
            return new_id;
        }

        Point wrap(Point p) const {
            double x = p.x - lx_ * std::floor(p.x / lx_);
            double y = p.y - ly_ * std::floor(p.y / ly_);
            if (x > lx_ - tol_) x = 0.0;
            if (y > ly_ - tol_) y = 0.0;
            return {x, y};
        }

    private:
        double periodic_distance(Point a, Point b) const {
            double dx = std::abs(a.x - b.x), dy = std::abs(a.y - b.y);
            dx = std::min(dx, lx_ - dx);
            dy = std::min(dy, ly_ - dy);
            return std::max(dx, dy);
        }

        double lx_, ly_, tol_, cell_;
        std::unordered_map<CellKey, std::vector<std::pair<Point, int>>, CellHash> cells_;
    };

    void build() {
        const int nv = static_cast<int>(vertices_.size());
        if (triangles_.empty()) throw TopologyError("mesh has no triangles");
        for (std::size_t t = 0; t < triangles_.size(); ++t) {
            auto& tri = triangles_[t];
            for (int v : tri) {
                if (v < 0 || v >= nv) throw TopologyError("triangle " + std::to_string(t) + " references missing vertex " + std::to_string(v));
            }
            if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) throw TopologyError("triangle " + std::to_string(t) + " repeats a vertex");
            const double a = triangle_area(static_cast<int>(t));
            if (a < 0.0) std::swap(tri[1], tri[2]);
        }
        for (int t = 0; t < num_triangles(); ++t) {
            (void)affine_map(t);  // throws on degenerate geometry
        }

        std::vector<char> used(nv, 0);
        for (const auto& tri : triangles_)
            for (int v : tri) used[v] = 1;
        for (int v = 0; v < nv; ++v)
            if (!used[v]) throw TopologyError("vertex " + std::to_string(v) + " is not used by any triangle");

        const double tol = tolerance();
        PeriodicPointSet vset(lx_, ly_, tol);
        vertex_map_.assign(nv, -1);
        num_canonical_vertices_ = 0;
        for (int v = 0; v < nv; ++v) {
            const Point p = vertices_[v];
            if (p.x < -tol || p.x > lx_ + tol || p.y < -tol || p.y > ly_ + tol)
                throw TopologyError("vertex " + std::to_string(v) + " lies outside the domain");
            const int id = vset.find_or_insert(p, num_canonical_vertices_);
            if (id == num_canonical_vertices_) ++num_canonical_vertices_;
            vertex_map_[v] = id;
        }

        // Edges are identified by their midpoint modulo the periods.
        PeriodicPointSet eset(lx_, ly_, tol);
        triangle_edges_.assign(triangles_.size(), {});
        std::vector<int> incidence;
        std::vector<int> sign_sum;
        for (int t = 0; t < num_triangles(); ++t) {
            for (int i = 0; i < 3; ++i) {
                const int a = triangles_[t][(i + 1) % 3];
                const int b = triangles_[t][(i + 2) % 3];
                const Point pa = vertices_[a], pb = vertices_[b];
                const int id = eset.find_or_insert(0.5 * (pa + pb), static_cast<int>(edges_.size()));
                const Point tangent = pb - pa;
                if (id == static_cast<int>(edges_.size())) {
                    Edge e;
                    int ca = vertex_map_[a], cb = vertex_map_[b];
                    Point dir = tangent;
                    const bool flip = ca > cb || (ca == cb && (dir.x < 0.0 || (dir.x == 0.0 && dir.y < 0.0)));
                    if (flip) {
                        std::swap(ca, cb);
                        dir = -1.0 * dir;
                    }
                    e.vertices = {ca, cb};
                    e.tangent = dir;
                    edges_.push_back(e);
                    incidence.push_back(0);
                    sign_sum.push_back(0);
                }
                const Edge& e = edges_[id];
                const double dot = tangent.x * e.tangent.x + tangent.y * e.tangent.y;
                const double len2 = tangent.x * tangent.x + tangent.y * tangent.y;
                const double cross = tangent.x * e.tangent.y - tangent.y * e.tangent.x;
                if (std::abs(cross) > 1e-8 * len2 || std::abs(std::abs(dot) - len2) > 1e-8 * len2)
                    throw TopologyError("edge copies of edge " + std::to_string(id) + " do not match geometrically");
                const int sign = dot > 0.0 ? 1 : -1;
                triangle_edges_[t][i] = {id, sign};
                ++incidence[id];
                sign_sum[id] += sign;
            }
        }
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            if (incidence[e] != 2)
                throw TopologyError("edge " + std::to_string(e) + " has " + std::to_string(incidence[e]) +
                                    " incident triangles after periodic identification (expected 2)");
            if (sign_sum[e] != 0) throw TopologyError("edge " + std::to_string(e) + " is seen with equal orientation by both triangles");
        }
        if (euler_characteristic() != 0)
            throw TopologyError("mesh is not a torus: V - E + F = " + std::to_string(euler_characteristic()));
        double total = 0.0;
        for (int t = 0; t < num_triangles(); ++t) total += triangle_area(t);
        if (std::abs(total - area()) > 1e-9 * area())
            throw TopologyError("triangles do not tile the domain (area " + std::to_string(total) + ")");
    }

    double lx_ = 0.0, ly_ = 0.0;
    std::vector<Point> vertices_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<int> vertex_map_;
    int num_canonical_vertices_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::array<TriangleEdge, 3>> triangle_edges_;
};

/// Structured periodic triangulation with nx*ny rectangular cells, each split into
/// two (diagonal) or four (crisscross, extra centre vertex) triangles.
inline Mesh make_periodic_rect_mesh(int nx, int ny, double lx, double ly, MeshPattern pattern = MeshPattern::diagonal) {
    if (nx < 1 || ny < 1) throw InvalidArgument("make_periodic_rect_mesh: cell counts must be >= 1");
    if (!(lx > 0.0) || !(ly > 0.0)) throw InvalidArgument("make_periodic_rect_mesh: extents must be positive");
    std::vector<Point> verts;
    verts.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1) + nx * ny));
    auto grid = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            verts.push_back({i == nx ? lx : lx * i / nx, j == ny ? ly : ly * j / ny});
    std::vector<std::array<int, 3>> tris;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int a = grid(i, j), b = grid(i + 1, j), c = grid(i + 1, j + 1), d = grid(i, j + 1);
            if (pattern == MeshPattern::diagonal) {
                tris.push_back({a, b, c});
                tris.push_back({a, c, d});
            } else {
                const int m = static_cast<int>(verts.size());
                verts.push_back({lx * (i + 0.5) / nx, ly * (j + 0.5) / ny});
                tris.push_back({a, b, m});
                tris.push_back({b, c, m});
                tris.push_back({c, d, m});
                tris.push_back({d, a, m});
            }
        }
    }
    return Mesh(lx, ly, std::move(verts), std::move(tris));
}

/// Plain-text mesh format:
///   meevc-mesh 1
///   Lx Ly
///   nv nt
///   nv lines "x y", then nt lines "i j k" (0-based). '#' starts a comment.
inline Mesh read_mesh(std::istream& in) {
    int lineno = 0;
    std::string raw;
    auto next = [&](std::istringstream& fields) -> bool {
        while (std::getline(in, raw)) {
            ++lineno;
            if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
            if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
            fields.clear();
            fields.str(raw);
            return true;
        }
        return false;
    };
    auto expect_end = [&](std::istringstream& fields) {
        std::string extra;
        if (fields >> extra) throw ParseError("unexpected trailing token '" + extra + "'", lineno);
    };
    std::istringstream f;
    if (!next(f)) throw ParseError("empty mesh file", lineno);
    std::string magic;
    int version = 0;
    if (!(f >> magic >> version) || magic != "meevc-mesh" || version != 1) throw ParseError("expected header 'meevc-mesh 1'", lineno);
    expect_end(f);
    double lx = 0, ly = 0;
    if (!next(f) || !(f >> lx >> ly)) throw ParseError("expected 'Lx Ly'", lineno);
    expect_end(f);
    long nv = 0, nt = 0;
    if (!next(f) || !(f >> nv >> nt) || nv <= 0 || nt <= 0) throw ParseError("expected positive 'nv nt'", lineno);
    expect_end(f);
    std::vector<Point> verts(static_cast<std::size_t>(nv));
    for (auto& p : verts) {
        if (!next(f) || !(f >> p.x >> p.y)) throw ParseError("expected vertex 'x y'", lineno);
        expect_end(f);
    }
    std::vector<std::array<int, 3>> tris(static_cast<std::size_t>(nt));
    for (auto& t : tris) {
        if (!next(f) || !(f >> t[0] >> t[1] >> t[2])) throw ParseError("expected triangle 'i j k'", lineno);
        expect_end(f);
    }
    std::istringstream rest;
    if (next(rest)) throw ParseError("unexpected content after triangle list", lineno);
    if (!(lx > 0.0) || !(ly > 0.0)) throw ParseError("domain extents must be positive", 2);
    return Mesh(lx, ly, std::move(verts), std::move(tris));
}

inline Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh file '" + path + "'");
    return read_mesh(in);
}

inline void write_mesh(std::ostream& out, const Mesh& mesh) {
    out << "meevc-mesh 1\n" << std::setprecision(17) << mesh.lx() << ' ' << mesh.ly() << '\n';
    out << mesh.vertices().size() << ' ' << mesh.triangles().size() << '\n';
    for (const auto& p : mesh.vertices()) out << p.x << ' ' << p.y << '\n';
    for (const auto& t : mesh.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline void save_mesh(const std::string& path, const Mesh& mesh) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write mesh file '" + path + "'");
    write_mesh(out, mesh);
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace meevc
