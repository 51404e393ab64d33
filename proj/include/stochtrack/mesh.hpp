#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "stochtrack/predicates.hpp"
#include "stochtrack/rng.hpp"
#include "stochtrack/vec.hpp"

namespace stochtrack {

// 3-D unstructured polyhedral mesh with possibly warped (non-planar) faces.
// Faces are ordered vertex loops; every face is decomposed into planar
// triangular sub-faces through its center, one per loop edge, with a canonical
// vertex ordering (center, then lower global id, then higher). Cells must be
// star-shaped around their center (the generators guarantee it, validate()
// checks it).

enum class BoundaryKind : std::uint8_t {
    None,     // interior face
    Outlet,
    Wall,
    PeriodicTranslation,
    PeriodicRotation,
};

struct BoundaryCondition {
    BoundaryKind kind = BoundaryKind::None;
    Vec3 offset{};        // translation applied when crossing (ptrans)
    Vec3 axis{};          // rotation axis through the origin (prot)
    double angle = 0.0;   // rotation angle, radians (prot)
    std::int32_t paired_face = -1;  // matching periodic face
};

struct Face {
    std::vector<std::int32_t> verts;  // ordered loop, >= 3 distinct vertices
    Vec3 center{};                    // arithmetic mean of the loop vertices
    std::array<std::int32_t, 2> cells{-1, -1};
    // Derived quantities for the crossing pre-filter:
    Vec3 normal{};      // unit loop normal (Newell); zero if degenerate
    double warp = 0.0;  // max out-of-plane distance of the loop vertices

    int n_edges() const { return static_cast<int>(verts.size()); }
};

struct Cell {
    std::vector<std::int32_t> faces;
    std::vector<std::int8_t> face_out;  // +1 if the face loop is outward-oriented
    Vec3 center{};                      // mean of the cell's distinct vertices
    double volume = 0.0;
    double max_vertex_dist = 0.0;       // max |X_c - vertex|, used by d*
};

struct SubFaceTri {
    Vec3 xf, xi, xj;          // canonical order
    std::int32_t vi, vj;      // global vertex ids, vi < vj
};

struct ValidationReport {
    std::vector<std::string> errors;
    bool ok() const { return errors.empty(); }
};

class Mesh {
public:
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<Cell> cells;
    std::vector<BoundaryCondition> boundary;  // parallel to faces

    std::int32_t n_cells() const { return static_cast<std::int32_t>(cells.size()); }
    std::int32_t n_faces() const { return static_cast<std::int32_t>(faces.size()); }

    bool is_boundary(std::int32_t f) const { return faces[f].cells[1] < 0; }

    std::int32_t neighbor_of(std::int32_t f, std::int32_t cell) const {
        const auto& fc = faces[f].cells;
        return fc[0] == cell ? fc[1] : fc[0];
    }

    // Characteristic length used for tolerances.
    double scale() const { return scale_; }

    // Canonical sub-face k of face f (one per loop edge). Deterministic and
    // identical whichever incident cell asks.
    SubFaceTri subface(std::int32_t f, int k) const {
        const Face& face = faces[f];
        const int n = face.n_edges();
        std::int32_t a = face.verts[k];
        std::int32_t b = face.verts[(k + 1) % n];
        if (a > b) std::swap(a, b);
        return {face.center, vertices[a], vertices[b], a, b};
    }

    std::vector<SubFaceTri> subfaces(std::int32_t f) const {
        std::vector<SubFaceTri> out;
        out.reserve(faces[f].verts.size());
        for (int k = 0; k < faces[f].n_edges(); ++k) out.push_back(subface(f, k));
        return out;
    }

    // Outward orientation of sub-face k of face f as seen from `cell`:
    // +1 when the canonical sub-face normal points out of the cell.
    int subface_outward_sign(std::int32_t cell, int face_slot, int k) const {
        const Cell& c = cells[cell];
        const Face& face = faces[c.faces[face_slot]];
        const int n = face.n_edges();
        const std::int32_t a = face.verts[k];
        const std::int32_t b = face.verts[(k + 1) % n];
        const int canon_vs_loop = (a < b) ? 1 : -1;
        return c.face_out[face_slot] * canon_vs_loop;
    }

    // Brute-force containment oracle: casts the line through `p` along a fixed
    // generic direction and counts sub-face crossings behind (n_in) and ahead
    // (n_out) of the point. For a watertight cell the point is inside iff both
    // counts are odd (1 in / 1 out for convex cells). If the two parities
    // disagree the cast is considered degenerate and a second direction is
    // tried.
    struct ContainsResult {
        bool inside = false;
        int n_in = 0;
        int n_out = 0;
        bool indeterminate = false;
    };

    ContainsResult contains_point_detail(std::int32_t cell, const Vec3& p) const {
        static const Vec3 dirs[2] = {
            normalized({0.5377397047367224, 0.7248052007031344, 0.4301886804968871}),
            normalized({-0.3714793746130246, 0.8033470974826913, -0.4654562431718757})};
        ContainsResult r;
        for (const Vec3& g : dirs) {
            r = count_line_crossings(cell, p, g);
            if (!r.indeterminate) return r;
        }
        r.inside = false;  // still degenerate after retry: report not contained
        return r;
    }

    bool contains_point(std::int32_t cell, const Vec3& p) const {
        return contains_point_detail(cell, p).inside;
    }

    // Uniform sample inside a (star-shaped) cell via its tetrahedral
    // decomposition (center, face center, edge).
    Vec3 sample_point_in_cell(std::int32_t cell, SeqRng& rng) const {
        const Cell& c = cells[cell];
        double total = 0.0;
        for (std::size_t s = 0; s < c.faces.size(); ++s) {
            const Face& f = faces[c.faces[s]];
            for (int k = 0; k < f.n_edges(); ++k) total += tet_volume_abs(c, f, k);
        }
        double pick = rng.next_uniform() * total;
        for (std::size_t s = 0; s < c.faces.size(); ++s) {
            const Face& f = faces[c.faces[s]];
            for (int k = 0; k < f.n_edges(); ++k) {
                const double v = tet_volume_abs(c, f, k);
                if (pick <= v || (s + 1 == c.faces.size() && k + 1 == f.n_edges())) {
                    const Vec3 a = c.center, b = f.center;
                    const Vec3 d1 = vertices[f.verts[k]];
                    const Vec3 d2 = vertices[f.verts[(k + 1) % f.n_edges()]];
                    return sample_in_tet(a, b, d1, d2, rng);
                }
                pick -= v;
            }
        }
        return c.center;  // unreachable
    }

    // Recompute all derived quantities. Must be called after construction.
    void finalize() {
        compute_face_geometry();
        compute_cell_geometry();
        compute_scale();
    }

    ValidationReport validate(int star_samples_per_cell = 0, std::uint64_t seed = 1) const;

private:
    double scale_ = 1.0;

    double tet_volume_abs(const Cell& c, const Face& f, int k) const {
        const Vec3 a = f.center - c.center;
        const Vec3 b = vertices[f.verts[k]] - c.center;
        const Vec3 d = vertices[f.verts[(k + 1) % f.n_edges()]] - c.center;
        return std::abs(triple(a, b, d)) / 6.0;
    }

    static Vec3 sample_in_tet(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                              SeqRng& rng) {
        // Uniform barycentric sample (folded-cube method).
        double s = rng.next_uniform(), t = rng.next_uniform(), u = rng.next_uniform();
        if (s + t > 1.0) { s = 1.0 - s; t = 1.0 - t; }
        if (t + u > 1.0) { const double tu = u; u = 1.0 - s - t; t = 1.0 - tu; }
        else if (s + t + u > 1.0) { const double tu = u; u = s + t + u - 1.0; s = 1.0 - t - tu; }
        return a + s * (b - a) + t * (c - a) + u * (d - a);
    }

    ContainsResult count_line_crossings(std::int32_t cell, const Vec3& p, const Vec3& g) const {
        ContainsResult r;
        const Vec3 q = p + g * std::max(scale_, 1.0);
        for (const std::int32_t fid : cells[cell].faces) {
            const Face& f = faces[fid];
            for (int k = 0; k < f.n_edges(); ++k) {
                const SubFaceTri t = subface(fid, k);
                double theta;
                if (subface_crossing(t.xf, t.xi, t.xj, p, q, theta)) {
                    if (theta < 0.0) ++r.n_in;
                    else ++r.n_out;
                }
            }
        }
        const bool odd_in = (r.n_in % 2) == 1;
        const bool odd_out = (r.n_out % 2) == 1;
        r.inside = odd_in && odd_out;
        r.indeterminate = (odd_in != odd_out);
        return r;
    }

    void compute_face_geometry() {
        for (Face& f : faces) {
            Vec3 c{};
            for (const auto v : f.verts) c += vertices[v];
            f.center = c * (1.0 / static_cast<double>(f.verts.size()));
            // Newell normal of the loop.
            Vec3 n{};
            const int ne = f.n_edges();
            for (int k = 0; k < ne; ++k) {
                const Vec3& a = vertices[f.verts[k]];
                const Vec3& b = vertices[f.verts[(k + 1) % ne]];
                n.x += (a.y - b.y) * (a.z + b.z);
                n.y += (a.z - b.z) * (a.x + b.x);
                n.z += (a.x - b.x) * (a.y + b.y);
            }
            const double nn = norm(n);
            if (nn > 0.0) {
                f.normal = n * (1.0 / nn);
                double w = 0.0;
                for (const auto v : f.verts)
                    w = std::max(w, std::abs(dot(vertices[v] - f.center, f.normal)));
                f.warp = w;
            } else {
                f.normal = Vec3{};
                f.warp = std::numeric_limits<double>::infinity();
            }
        }
    }

    void compute_cell_geometry() {
        std::vector<std::int32_t> vs;
        for (Cell& c : cells) {
            vs.clear();
            for (const auto fid : c.faces)
                for (const auto v : faces[fid].verts) vs.push_back(v);
            std::sort(vs.begin(), vs.end());
            vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
            Vec3 sum{};
            for (const auto v : vs) sum += vertices[v];
            c.center = sum * (1.0 / static_cast<double>(vs.size()));
            double md = 0.0;
            for (const auto v : vs) md = std::max(md, norm(vertices[v] - c.center));
            c.max_vertex_dist = md;

            // Outward flag per face: orientation of the loop cone as seen from
            // the cell center; volume is the sum of the oriented cones.
            c.face_out.assign(c.faces.size(), 1);
            double vol = 0.0;
            for (std::size_t s = 0; s < c.faces.size(); ++s) {
                const Face& f = faces[c.faces[s]];
                double cone = 0.0;
                for (int k = 0; k < f.n_edges(); ++k) {
                    const Vec3 a = f.center - c.center;
                    const Vec3 b = vertices[f.verts[k]] - c.center;
                    const Vec3 d = vertices[f.verts[(k + 1) % f.n_edges()]] - c.center;
                    cone += triple(a, b, d) / 6.0;
                }
                c.face_out[s] = cone >= 0.0 ? 1 : -1;
                vol += std::abs(cone);
            }
            c.volume = vol;
        }
    }

    void compute_scale() {
        if (vertices.empty()) { scale_ = 1.0; return; }
        Vec3 lo = vertices[0], hi = vertices[0];
        for (const Vec3& v : vertices) {
            lo.x = std::min(lo.x, v.x); lo.y = std::min(lo.y, v.y); lo.z = std::min(lo.z, v.z);
            hi.x = std::max(hi.x, v.x); hi.y = std::max(hi.y, v.y); hi.z = std::max(hi.z, v.z);
        }
        scale_ = std::max(norm(hi - lo), 1e-300);
    }
};

// Applies the boundary transform of a periodic face to a point (rotation about
// an axis through the origin, then translation).
inline Vec3 apply_periodic_transform(const BoundaryCondition& bc, const Vec3& p) {
    Vec3 q = p;
    if (bc.kind == BoundaryKind::PeriodicRotation) {
        const Vec3 k = normalized(bc.axis);
        const double ca = std::cos(bc.angle), sa = std::sin(bc.angle);
        q = q * ca + cross(k, q) * sa + k * (dot(k, q) * (1.0 - ca));
    }
    return q + bc.offset;
}

inline Vec3 apply_periodic_rotation(const BoundaryCondition& bc, const Vec3& v) {
    if (bc.kind != BoundaryKind::PeriodicRotation) return v;
    const Vec3 k = normalized(bc.axis);
    const double ca = std::cos(bc.angle), sa = std::sin(bc.angle);
    return v * ca + cross(k, v) * sa + k * (dot(k, v) * (1.0 - ca));
}

inline ValidationReport Mesh::validate(int star_samples_per_cell, std::uint64_t seed) const {
    ValidationReport rep;
    auto fail = [&rep](const std::string& msg) { rep.errors.push_back(msg); };

    const double vol_tol = 1e-9;

    for (std::int32_t fi = 0; fi < n_faces(); ++fi) {
        const Face& f = faces[fi];
        if (f.verts.size() < 3) {
            fail("face " + std::to_string(fi) + ": fewer than 3 vertices");
            continue;
        }
        for (int k = 0; k < f.n_edges(); ++k) {
            if (f.verts[k] < 0 || f.verts[k] >= static_cast<std::int32_t>(vertices.size()))
                fail("face " + std::to_string(fi) + ": vertex id out of range");
            if (f.verts[k] == f.verts[(k + 1) % f.n_edges()])
                fail("face " + std::to_string(fi) + ": consecutive duplicate vertices");
        }
        const bool interior = f.cells[1] >= 0;
        if (f.cells[0] < 0) fail("face " + std::to_string(fi) + ": no incident cell");
        if (!interior && boundary[fi].kind == BoundaryKind::None)
            fail("face " + std::to_string(fi) + ": boundary face without tag");
        if (interior && boundary[fi].kind != BoundaryKind::None)
            fail("face " + std::to_string(fi) + ": interior face carries a boundary tag");
    }

    // Per-cell closure, star-shapedness and center containment.
    for (std::int32_t ci = 0; ci < n_cells(); ++ci) {
        const Cell& c = cells[ci];
        if (c.faces.empty()) {
            fail("cell " + std::to_string(ci) + ": empty face set");
            continue;
        }
        const Vec3 ref2 = c.center + Vec3{0.31 * scale_, 0.17 * scale_, 0.23 * scale_};
        double vol1 = 0.0, vol2 = 0.0;
        bool star = true;
        for (std::size_t s = 0; s < c.faces.size(); ++s) {
            const Face& f = faces[c.faces[s]];
            const double out = c.face_out[s];
            for (int k = 0; k < f.n_edges(); ++k) {
                const Vec3& vk = vertices[f.verts[k]];
                const Vec3& vk1 = vertices[f.verts[(k + 1) % f.n_edges()]];
                const double t1 =
                    triple(f.center - c.center, vk - c.center, vk1 - c.center) / 6.0;
                const double t2 = triple(f.center - ref2, vk - ref2, vk1 - ref2) / 6.0;
                vol1 += out * t1;
                vol2 += out * t2;
                // A sub-face tet oriented against the face's outward cone means
                // part of the boundary is not visible from the center.
                const double sub_scale = std::abs(t1) + std::abs(t2);
                if (out * t1 < 0.0 && std::abs(t1) > vol_tol * sub_scale) star = false;
            }
        }
        if (vol1 <= 0.0) fail("cell " + std::to_string(ci) + ": non-positive volume");
        const double vref = std::max(std::abs(vol1), 1e-300);
        if (std::abs(vol1 - vol2) > 1e-6 * vref)
            fail("cell " + std::to_string(ci) + ": non-watertight cell (volume depends on reference point)");
        if (!star) fail("cell " + std::to_string(ci) + ": not star-shaped around its center");
        if (!contains_point(ci, c.center))
            fail("cell " + std::to_string(ci) + ": center fails the containment oracle");
    }

    // Interior faces must be seen with opposite orientation from both sides.
    {
        std::vector<std::array<std::int8_t, 2>> seen(n_faces(), {0, 0});
        for (std::int32_t ci = 0; ci < n_cells(); ++ci) {
            const Cell& c = cells[ci];
            for (std::size_t s = 0; s < c.faces.size(); ++s) {
                const std::int32_t fid = c.faces[s];
                const int slot = faces[fid].cells[0] == ci ? 0 : 1;
                seen[fid][slot] = c.face_out[s];
            }
        }
        for (std::int32_t fi = 0; fi < n_faces(); ++fi) {
            if (faces[fi].cells[1] >= 0 && seen[fi][0] * seen[fi][1] != -1)
                fail("face " + std::to_string(fi) + ": incident cells agree on orientation");
        }
    }

    // Periodic pairing.
    for (std::int32_t fi = 0; fi < n_faces(); ++fi) {
        const BoundaryCondition& bc = boundary[fi];
        if (bc.kind != BoundaryKind::PeriodicTranslation &&
            bc.kind != BoundaryKind::PeriodicRotation)
            continue;
        if (bc.paired_face < 0 || bc.paired_face >= n_faces()) {
            fail("face " + std::to_string(fi) + ": periodic face without partner");
            continue;
        }
        const Face& f = faces[fi];
        const Face& g = faces[bc.paired_face];
        if (boundary[bc.paired_face].paired_face != fi)
            fail("face " + std::to_string(fi) + ": periodic pairing not symmetric");
        if (f.verts.size() != g.verts.size()) {
            fail("face " + std::to_string(fi) + ": periodic partner loop size differs");
            continue;
        }
        const double tol = 1e-12 * std::max(scale_, 1.0);
        for (const auto v : f.verts) {
            const Vec3 tv = apply_periodic_transform(bc, vertices[v]);
            double best = std::numeric_limits<double>::infinity();
            for (const auto w : g.verts) best = std::min(best, norm(tv - vertices[w]));
            if (best > tol) {
                fail("face " + std::to_string(fi) + ": periodic transform does not map onto partner");
                break;
            }
        }
    }

    // Optional star-shape sampling: random interior points must pass the
    // containment oracle.
    if (star_samples_per_cell > 0) {
        SeqRng rng(seed);
        for (std::int32_t ci = 0; ci < n_cells(); ++ci) {
            for (int s = 0; s < star_samples_per_cell; ++s) {
                const Vec3 p = sample_point_in_cell(ci, rng);
                if (!contains_point(ci, p)) {
                    fail("cell " + std::to_string(ci) + ": sampled interior point fails containment");
                    break;
                }
            }
        }
    }

    return rep;
}

}  // namespace stochtrack
