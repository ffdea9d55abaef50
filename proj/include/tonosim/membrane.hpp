#pragma once

// Mechanical and electrical model of one capacitive sensing element: a
// clamped square membrane over a fixed bottom electrode. Small-deflection
// Kirchhoff plate theory; capacitance by midpoint quadrature of the
// deflected parallel-plate gap.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tonosim/errors.hpp"

namespace tonosim {

inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m

// Center deflection of a clamped square plate under uniform load:
// w0 = alpha * p * a^4 / D  (Timoshenko, uniform load, clamped edges).
inline constexpr double kClampedPlateAlpha = 0.00126;

// Refuse to operate within this fraction of the electrode gap; the linear
// plate model and the charge front end are both invalid near contact.
inline constexpr double kContactFraction = 0.9;

inline constexpr int kDefaultQuadratureN = 64;

struct MembraneGeometry {
    double side_length = 100e-6;       // m
    double thickness = 3e-6;           // m
    double gap0 = 600e-9;              // m, undeflected electrode gap
    double electrode_coverage = 1.0;   // fraction of plate area in (0,1]

    void validate() const {
        if (!(side_length > 0.0) || !(thickness > 0.0) || !(gap0 > 0.0))
            throw InvalidSpec("membrane geometry: all lengths must be > 0");
        if (!(electrode_coverage > 0.0) || electrode_coverage > 1.0)
            throw InvalidSpec("membrane geometry: electrode_coverage must be in (0,1]");
    }
};

struct MaterialParams {
    // Effective elastic constants of the oxide/nitride/metal stack.
    // Uncalibrated defaults; the source process does not publish them.
    double youngs_modulus = 70e9;  // Pa
    double poisson_ratio = 0.25;

    void validate() const {
        if (!(youngs_modulus > 0.0))
            throw InvalidSpec("material: youngs_modulus must be > 0");
        if (poisson_ratio < 0.0 || poisson_ratio >= 0.5)
            throw InvalidSpec("material: poisson_ratio must be in [0, 0.5)");
    }
};

// Normalized deflection w(u,v)/w_center on the unit square, u,v in [0,1].
// Cosine-product clamped approximation: zero value and zero normal slope on
// all four edges, 1 at the center.
inline double clamped_shape(double u, double v) {
    const double su = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * u));
    const double sv = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * v));
    return su * sv;
}

struct DeflectionProfile {
    // Positive toward the bottom electrode.
    double center_deflection = 0.0;  // m

    double shape(double u, double v) const { return clamped_shape(u, v); }
    double at(double u, double v) const { return center_deflection * clamped_shape(u, v); }
};

// D = E t^3 / (12 (1 - nu^2))
inline double flexural_rigidity(const MembraneGeometry& g, const MaterialParams& m) {
    g.validate();
    m.validate();
    const double t3 = g.thickness * g.thickness * g.thickness;
    return m.youngs_modulus * t3 / (12.0 * (1.0 - m.poisson_ratio * m.poisson_ratio));
}

// net_pressure = contact pressure - backpressure; negative values deflect
// away from the bottom electrode.
inline DeflectionProfile deflect(const MembraneGeometry& g, const MaterialParams& m,
                                 double net_pressure_pa) {
    const double d = flexural_rigidity(g, m);
    const double a4 = std::pow(g.side_length, 4);
    const double w0 = kClampedPlateAlpha * net_pressure_pa * a4 / d;
    if (std::abs(w0) >= kContactFraction * g.gap0)
        throw MembraneContact("deflect: " + std::to_string(w0 * 1e9) +
                              " nm center deflection is within " +
                              std::to_string((1.0 - kContactFraction) * 100.0) +
                              "% of the " + std::to_string(g.gap0 * 1e9) + " nm gap");
    return DeflectionProfile{w0};
}

// Midpoint quadrature grid over the electrode, a centered square covering
// electrode_coverage of the plate area. Shape values are cached so repeated
// capacitance evaluations against the same geometry stay cheap.
class ElectrodeGrid {
public:
    explicit ElectrodeGrid(const MembraneGeometry& g, int n = kDefaultQuadratureN)
        : n_(n), shape_(static_cast<size_t>(n) * n) {
        g.validate();
        if (n < 2) throw InvalidSpec("quadrature grid must have n >= 2");
        const double half_span = 0.5 * std::sqrt(g.electrode_coverage);
        const double lo = 0.5 - half_span;  // unit-square coords
        const double span = 2.0 * half_span;
        const double du = span / n;
        cell_area_ = du * g.side_length * du * g.side_length;
        for (int i = 0; i < n; ++i) {
            const double u = lo + (i + 0.5) * du;
            for (int j = 0; j < n; ++j) {
                const double v = lo + (j + 0.5) * du;
                shape_[static_cast<size_t>(i) * n + j] = clamped_shape(u, v);
            }
        }
    }

    int n() const { return n_; }
    double cell_area() const { return cell_area_; }
    const std::vector<double>& shape() const { return shape_; }

private:
    int n_;
    double cell_area_;          // m^2 per cell
    std::vector<double> shape_; // normalized deflection at cell midpoints
};

// C = eps0 * sum dA / (gap0 - w(u,v)) over the electrode.
inline double capacitance(const MembraneGeometry& g, const DeflectionProfile& p,
                          const ElectrodeGrid& grid) {
    const double w0 = p.center_deflection;
    double sum = 0.0;
    for (double s : grid.shape()) {
        const double gap = g.gap0 - w0 * s;
        if (gap <= 0.0)
            throw MembraneContact("capacitance: electrode gap closed");
        sum += 1.0 / gap;
    }
    return kVacuumPermittivity * grid.cell_area() * sum;
}

inline double capacitance(const MembraneGeometry& g, const DeflectionProfile& p,
                          int quadrature_n = kDefaultQuadratureN) {
    return capacitance(g, p, ElectrodeGrid(g, quadrature_n));
}

// Analytic dC/dw_center at the given profile:
// eps0 * sum s dA / (gap0 - w0 s)^2.  At w0 = 0 this reduces to
// eps0 / gap0^2 * integral of the shape over the electrode.
inline double capacitance_sensitivity(const MembraneGeometry& g, const DeflectionProfile& p,
                                      const ElectrodeGrid& grid) {
    const double w0 = p.center_deflection;
    double sum = 0.0;
    for (double s : grid.shape()) {
        const double gap = g.gap0 - w0 * s;
        if (gap <= 0.0)
            throw MembraneContact("capacitance_sensitivity: electrode gap closed");
        sum += s / (gap * gap);
    }
    return kVacuumPermittivity * grid.cell_area() * sum;
}

inline double capacitance_sensitivity(const MembraneGeometry& g, const DeflectionProfile& p,
                                      int quadrature_n = kDefaultQuadratureN) {
    return capacitance_sensitivity(g, p, ElectrodeGrid(g, quadrature_n));
}

// Rest capacitance eps0 * A_electrode / gap0.
inline double rest_capacitance(const MembraneGeometry& g) {
    g.validate();
    const double area = g.side_length * g.side_length * g.electrode_coverage;
    return kVacuumPermittivity * area / g.gap0;
}

}  // namespace tonosim
