#pragma once

#include "stochtrack/vec.hpp"

namespace stochtrack {

// Boolean crossing predicates for planar triangular sub-faces. All
// inequalities are strict: a query point lying exactly on a projected edge is
// assigned to the closed right half plane. Because the result depends only on
// the operand values (never on which cell asks), the tests partition space and
// a segment through a shared edge is claimed by exactly one of the two
// adjacent sub-faces, provided callers pass vertices in the canonical order
// (face center first, then lower global vertex id, then higher).

// True iff (X_a X_b ^ X_a X_O) . d > 0.
inline bool edge_side_test(const Vec3& xa, const Vec3& xb, const Vec3& xo, const Vec3& d) {
    return triple(xb - xa, xo - xa, d) > 0.0;
}

// True iff the oriented sub-face normal has a positive component along d.
inline bool face_alignment_test(const Vec3& xf, const Vec3& xi, const Vec3& xj,
                                const Vec3& d) {
    return triple(xi - xf, xj - xf, d) > 0.0;
}

// Crossing of the line (X_O X_D) with the sub-face (X_f, X_i, X_j).
// On a hit, theta is the relative position of the intersection along the
// segment: X_I = X_O + theta (X_D - X_O). theta < 0 means the intersection
// lies behind the start point. The division is well posed: the combined
// Boolean condition cannot hold when d lies in the sub-face plane.
inline bool subface_crossing(const Vec3& xf, const Vec3& xi, const Vec3& xj,
                             const Vec3& xo, const Vec3& xd, double& theta) {
    const Vec3 d = xd - xo;
    const bool align = face_alignment_test(xf, xi, xj, d);
    if (edge_side_test(xi, xj, xo, d) != align) return false;
    if (edge_side_test(xf, xi, xo, d) != align) return false;
    if (edge_side_test(xf, xj, xo, d) == align) return false;
    const Vec3 n = cross(xi - xf, xj - xf);
    theta = dot(xf - xo, n) / dot(d, n);
    return true;
}

}  // namespace stochtrack
