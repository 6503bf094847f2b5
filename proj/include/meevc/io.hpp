#pragma once

// Output formats: diagnostics CSV, plain-text checkpoints, legacy ASCII VTK.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "errors.hpp"
#include "timestepper.hpp"

namespace meevc {

namespace detail {

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

}  // namespace detail

/// Header t,K,E,Wtot,div_norm, plus err_u,err_w when any record carries errors.
inline void write_diagnostics_csv(std::ostream& out, const std::vector<DiagnosticRecord>& records) {
    bool errors = false;
    for (const auto& r : records) errors = errors || r.err_u.has_value();
    out << "t,K,E,Wtot,div_norm" << (errors ? ",err_u,err_w" : "") << '\n';
    for (const auto& r : records) {
        out << detail::fmt17(r.t) << ',' << detail::fmt17(r.K) << ',' << detail::fmt17(r.E) << ',' << detail::fmt17(r.Wtot) << ','
            << detail::fmt17(r.div_norm);
        if (errors) out << ',' << detail::fmt17(r.err_u.value_or(NAN)) << ',' << detail::fmt17(r.err_w.value_or(NAN));
        out << '\n';
    }
    if (!out) throw IoError("failed writing diagnostics CSV");
}

inline void save_diagnostics_csv(const std::filesystem::path& path, const std::vector<DiagnosticRecord>& records) {
    auto out = detail::open_for_write(path);
    write_diagnostics_csv(out, records);
}

inline std::vector<DiagnosticRecord> read_diagnostics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("diagnostics CSV: missing header", 1);
    const bool errors = line == "t,K,E,Wtot,div_norm,err_u,err_w";
    if (!errors && line != "t,K,E,Wtot,div_norm") throw ParseError("diagnostics CSV: unexpected header '" + line + "'", 1);
    std::vector<DiagnosticRecord> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> v;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                v.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError("diagnostics CSV: bad number '" + cell + "'", lineno);
            }
        }
        if (v.size() != (errors ? 7u : 5u)) throw ParseError("diagnostics CSV: wrong column count", lineno);
        DiagnosticRecord r{v[0], v[1], v[2], v[3], v[4], std::nullopt, std::nullopt};
        if (errors) r.err_u = v[5], r.err_w = v[6];
        out.push_back(r);
    }
    return out;
}

inline std::vector<DiagnosticRecord> load_diagnostics_csv(const std::filesystem::path& path) {
    auto in = detail::open_for_read(path);
    return read_diagnostics_csv(in);
}

// Checkpoint layout:
//   meevc-checkpoint 1
//   k <int> / t <real> / dt <real> / nu <real>
//   spaces <RT> <DG> <CG>
//   <name> <count> <time>   followed by <count> values, for u, omega, pbar
inline void write_checkpoint(std::ostream& out, const SimState& s) {
    out << "meevc-checkpoint 1\n";
    out << "k " << s.k << "\nt " << detail::fmt17(s.time()) << "\ndt " << detail::fmt17(s.dt) << "\nnu " << detail::fmt17(s.nu) << '\n';
    out << "spaces " << s.u.space->descriptor() << ' ' << s.pbar.space->descriptor() << ' ' << s.omega.space->descriptor() << '\n';
    for (const auto& [name, f] : {std::pair<const char*, const Field*>{"u", &s.u}, {"omega", &s.omega}, {"pbar", &s.pbar}}) {
        out << name << ' ' << f->coeffs.size() << ' ' << detail::fmt17(f->time) << '\n';
        for (Eigen::Index i = 0; i < f->coeffs.size(); ++i) out << detail::fmt17(f->coeffs(i)) << '\n';
    }
    if (!out) throw IoError("failed writing checkpoint");
}

inline void save_checkpoint(const std::filesystem::path& path, const SimState& s) {
    auto out = detail::open_for_write(path);
    write_checkpoint(out, s);
}

inline SimState read_checkpoint(std::istream& in, const Discretization& d) {
    int lineno = 0;
    auto next = [&]() {
        std::string line;
        if (!std::getline(in, line)) throw ParseError("checkpoint: unexpected end of file", lineno + 1);
        ++lineno;
        return line;
    };
    if (next() != "meevc-checkpoint 1") throw ParseError("checkpoint: bad magic line", 1);
    auto keyed = [&](const std::string& key) {
        std::istringstream ss(next());
        std::string k;
        double v;
        if (!(ss >> k >> v) || k != key) throw ParseError("checkpoint: expected '" + key + "'", lineno);
        return v;
    };
    SimState s;
    s.k = static_cast<int>(keyed("k"));
    keyed("t");
    s.dt = keyed("dt");
    s.nu = keyed("nu");
    {
        std::istringstream ss(next());
        std::string key, u, q, w;
        if (!(ss >> key >> u >> q >> w) || key != "spaces") throw ParseError("checkpoint: expected 'spaces'", lineno);
        if (u != d.U->descriptor() || q != d.Q->descriptor() || w != d.W->descriptor())
            throw InvalidArgument("checkpoint spaces " + u + " " + q + " " + w + " do not match the discretization");
    }
    auto field = [&](const std::string& name, const std::shared_ptr<const FunctionSpace>& space) {
        std::istringstream ss(next());
        std::string key;
        long n;
        double t;
        if (!(ss >> key >> n >> t) || key != name) throw ParseError("checkpoint: expected field '" + name + "'", lineno);
        if (n != space->dim()) throw InvalidArgument("checkpoint field '" + name + "' has the wrong size");
        Vector c(n);
        for (long i = 0; i < n; ++i) {
            const std::string v = next();
            try {
                c(i) = std::stod(v);
            } catch (const std::exception&) {
                throw ParseError("checkpoint: bad number '" + v + "'", lineno);
            }
        }
        return Field(space, std::move(c), t);
    };
    s.u = field("u", d.U);
    s.omega = field("omega", d.W);
    s.pbar = field("pbar", d.Q);
    return s;
}

inline SimState load_checkpoint(const std::filesystem::path& path, const Discretization& d) {
    auto in = detail::open_for_read(path);
    return read_checkpoint(in, d);
}

/// Legacy ASCII VTK: vorticity as point data on the mesh vertices, velocity sampled
/// at triangle centroids as cell data.
inline void write_vtk(std::ostream& out, const SimState& s) {
    const Mesh& mesh = s.omega.space->mesh();
    const auto& verts = mesh.vertices();
    const auto& tris = mesh.triangles();
    std::vector<double> omega(verts.size(), 0.0);
    const std::vector<Point> corners{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    const std::vector<Point> centroid{{1.0 / 3.0, 1.0 / 3.0}};
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto w = evaluate_scalar(s.omega, t, corners);
        for (int i = 0; i < 3; ++i) omega[static_cast<std::size_t>(tris[static_cast<std::size_t>(t)][i])] = w.value(i);
    }
    out << "# vtk DataFile Version 3.0\nmeevc t=" << detail::fmt17(s.time()) << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << verts.size() << " double\n";
    for (const auto& v : verts) out << detail::fmt17(v.x) << ' ' << detail::fmt17(v.y) << " 0\n";
    out << "CELLS " << tris.size() << ' ' << 4 * tris.size() << '\n';
    for (const auto& t : tris) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out << "CELL_TYPES " << tris.size() << '\n';
    for (std::size_t i = 0; i < tris.size(); ++i) out << "5\n";
    out << "POINT_DATA " << verts.size() << "\nSCALARS vorticity double 1\nLOOKUP_TABLE default\n";
    for (double w : omega) out << detail::fmt17(w) << '\n';
    out << "CELL_DATA " << tris.size() << "\nVECTORS velocity double\n";
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto u = evaluate_vector(s.u, t, centroid);
        out << detail::fmt17(u.x(0)) << ' ' << detail::fmt17(u.y(0)) << " 0\n";
    }
    if (!out) throw IoError("failed writing VTK snapshot");
}

inline void save_vtk(const std::filesystem::path& path, const SimState& s) {
    auto out = detail::open_for_write(path);
    write_vtk(out, s);
}

}  // namespace meevc
