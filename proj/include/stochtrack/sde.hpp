#pragma once

#include <algorithm>
#include <cmath>

#include "stochtrack/vec.hpp"

namespace stochtrack {

// Exact-in-constant-fields exponential integration of the simplified Langevin
// model
//   dX = U dt
//   dU = -(1/rho) grad<P> dt - (U - <U>)/T_L dt + sqrt(C0 eps) dW
// The scheme discretizes the integrated OU solution, so it is unconditionally
// stable and exact (weakly) when the per-cell fields are constant.

// Per-cell P0 mean fields.
struct CellFields {
    Vec3 mean_u{};              // <U> (m/s)
    double t_l = 0.0;           // Lagrangian timescale (s)
    double epsilon = 0.0;       // dissipation rate (m^2/s^3)
    double k = 0.0;             // turbulent kinetic energy (m^2/s^2)
    double c0 = 2.1;            // Kolmogorov constant
    Vec3 pressure_grad_over_rho{};  // (1/rho) grad<P> (m/s^2)
};

// Below this timescale the velocity relaxes instantaneously: pure advection
// at the cell mean velocity, no noise.
inline constexpr double kTimescaleFloor = 1e-30;

// Second-order moments of the correlated stochastic integrals (I^U, I^X)
// over one interval, per velocity component.
struct IntegralMoments {
    double var_iu = 0.0;   // <(I^U)^2>   (m/s)^2
    double cov_iuix = 0.0; // <I^U I^X>   m^2/s
    double var_ix = 0.0;   // <(I^X)^2>   m^2
};

// One set of normalized Gaussian draws: a (zeta^U, zeta^X) pair per component.
struct NoiseDraw {
    Vec3 zeta_u{};
    Vec3 zeta_x{};
};

namespace detail {

// x - (1 - e^-x), stable for all x >= 0. Series below the switch point,
// expm1 form above; leading term x^2/2.
inline double x_minus_one_minus_exp(double x) {
    if (x < 0.1) {
        // sum_{k>=2} (-1)^k x^k / k!
        double term = x * x / 2.0;
        double sum = term;
        for (int k = 3; k <= 20; ++k) {
            term *= -x / static_cast<double>(k);
            sum += term;
            if (std::abs(term) < 1e-20 * std::abs(sum)) break;
        }
        return sum;
    }
    return x - (-std::expm1(-x));
}

// Bracket of <(I^X)^2>: g(x) = x - (1/2)(1 - e^-x)(3 - e^-x), stable for all
// x >= 0; leading term x^3/3. Coefficients: (-1)^k (4 - 2^k) / (2 k!).
inline double ix_variance_bracket(double x) {
    if (x < 0.1) {
        double sum = 0.0;
        double xk = x * x * x;        // x^k
        double kfact = 6.0;           // k!
        double p2 = 8.0;              // 2^k
        double sign = -1.0;           // (-1)^k
        for (int k = 3; k <= 24; ++k) {
            const double term = sign * (4.0 - p2) / (2.0 * kfact) * xk;
            sum += term;
            if (std::abs(term) < 1e-20 * std::abs(sum)) break;
            xk *= x;
            kfact *= static_cast<double>(k + 1);
            p2 *= 2.0;
            sign = -sign;
        }
        return sum;
    }
    const double a = -std::expm1(-x);  // 1 - e^-x
    return x - a - 0.5 * a * a;
}

}  // namespace detail

// Drift coefficient entering the exponential scheme. Defined so that
// U = C T_L is the stationary velocity of the per-cell OU process.
inline Vec3 drift_coefficient(const CellFields& f) {
    return f.mean_u * (1.0 / f.t_l) - f.pressure_grad_over_rho;
}

// Second-order moment matrix of (I^U, I^X) over an interval dt.
inline IntegralMoments integral_moments(double dt, double t_l, double c0, double epsilon) {
    IntegralMoments m;
    if (dt <= 0.0 || t_l <= kTimescaleFloor) return m;
    const double x = dt / t_l;
    const double q = c0 * epsilon;
    const double em = -std::expm1(-x);            // 1 - e^-x
    const double e2m = em * (2.0 - em);           // 1 - e^-2x
    m.var_iu = q * 0.5 * t_l * e2m;
    m.cov_iuix = q * 0.5 * t_l * t_l * em * em;
    m.var_ix = q * t_l * t_l * t_l * detail::ix_variance_bracket(x);
    return m;
}

// Choleski sampling of the correlated pair (I^U, I^X) from one (zeta^U, zeta^X).
inline void sample_integrals(const IntegralMoments& m, double zeta_u, double zeta_x,
                             double& iu, double& ix) {
    if (m.var_iu <= 0.0) {
        iu = 0.0;
        ix = std::sqrt(std::max(0.0, m.var_ix)) * zeta_x;
        return;
    }
    const double su = std::sqrt(m.var_iu);
    const double c = m.cov_iuix / su;
    const double resid = std::max(0.0, m.var_ix - c * c);
    iu = su * zeta_u;
    ix = c * zeta_u + std::sqrt(resid) * zeta_x;
}

// One exponential-scheme update of (X, U) over dt with frozen cell fields.
inline void exponential_step(Vec3& x, Vec3& u, const CellFields& f, double dt,
                             const NoiseDraw& draw) {
    if (dt < 0.0) dt = 0.0;
    if (f.t_l <= kTimescaleFloor) {
        // Laminar branch: instantaneous relaxation to the mean velocity.
        u = f.mean_u;
        x += u * dt;
        return;
    }
    const double tl = f.t_l;
    const double xr = dt / tl;
    const double em = -std::expm1(-xr);           // 1 - e^-x
    const double e = 1.0 - em;                    // e^-x
    const double lag = tl * detail::x_minus_one_minus_exp(xr);  // dt - T_L (1 - e^-x)
    const Vec3 c = drift_coefficient(f);
    const IntegralMoments m = integral_moments(dt, tl, f.c0, f.epsilon);

    Vec3 xn = x, un = u;
    for (int i = 0; i < 3; ++i) {
        double iu, ix;
        sample_integrals(m, draw.zeta_u[i], draw.zeta_x[i], iu, ix);
        xn[i] = x[i] + u[i] * tl * em + c[i] * tl * lag + ix;
        un[i] = u[i] * e + c[i] * tl * em + iu;
    }
    x = xn;
    u = un;
}

// Mean conditional end-of-interval position <X(dt) | X(0), U(0)>: the
// exponential step with the stochastic integrals forced to zero.
inline Vec3 mean_conditional_endpoint(const Vec3& x, const Vec3& u, const CellFields& f,
                                      double dt) {
    if (dt < 0.0) dt = 0.0;
    if (f.t_l <= kTimescaleFloor) return x + f.mean_u * dt;
    const double tl = f.t_l;
    const double xr = dt / tl;
    const double em = -std::expm1(-xr);
    const double lag = tl * detail::x_minus_one_minus_exp(xr);
    const Vec3 c = drift_coefficient(f);
    return x + u * (tl * em) + c * (tl * lag);
}

// Moments of the combined integrals when one interval dt is split at theta:
// a step over theta*dt followed by an independent step over (1-theta)*dt,
// with the first-leg contributions carried through the relaxation factors.
// Equals integral_moments(dt, ...) for every theta; the identity is what makes
// the cell-to-cell split statistically exact in constant fields.
inline IntegralMoments two_substep_moments(double theta, double dt, double t_l,
                                           double c0, double epsilon) {
    theta = std::clamp(theta, 0.0, 1.0);
    const double dta = theta * dt;
    const double dtb = dt - dta;
    const IntegralMoments a = integral_moments(dta, t_l, c0, epsilon);
    const IntegralMoments b = integral_moments(dtb, t_l, c0, epsilon);
    if (t_l <= kTimescaleFloor) return b;
    const double xb = dtb / t_l;
    const double w = -std::expm1(-xb);      // 1 - e^-xb
    const double eb = 1.0 - w;              // e^-xb
    IntegralMoments m;
    m.var_iu = a.var_iu * eb * eb + b.var_iu;
    m.cov_iuix = t_l * w * eb * a.var_iu + eb * a.cov_iuix + b.cov_iuix;
    m.var_ix = t_l * t_l * w * w * a.var_iu + 2.0 * t_l * w * a.cov_iuix + a.var_ix + b.var_ix;
    return m;
}

}  // namespace stochtrack
