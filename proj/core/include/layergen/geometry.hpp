#pragma once

#include <layergen/reaction.hpp>

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace layergen {

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Point2 = std::array<double, 2>;

/// Radially symmetric ball of radius R in N dimensions, split into Nr shells.
/// Volumes and face areas carry the surface factor of the unit sphere, so the
/// cell volumes sum to |B_R|.
struct RadialGrid {
    RadialGrid(int dim, double radius, std::size_t cells);

    int dim;
    double R;
    std::size_t Nr;
    double dr;
    std::vector<double> centers;     // Nr
    std::vector<double> faces;       // Nr + 1, faces[0] = 0, faces[Nr] = R
    std::vector<double> volumes;     // Nr
    std::vector<double> face_areas;  // Nr + 1

    std::size_t size() const { return Nr; }
    double spacing() const { return dr; }
    double domain_volume() const;    // closed form |B_R|

    /// Largest (A_in + A_out) dr / (2 V) over cells: 1 for N = 2, N/2 near the
    /// origin otherwise. Scales the explicit diffusion step bound.
    double stencil_dimension() const;
};

/// Box [0,Lx] x [0,Ly] with square cells.
struct CartesianGrid2D {
    CartesianGrid2D(double Lx, double Ly, std::size_t Nx, std::size_t Ny);

    double Lx, Ly;
    std::size_t Nx, Ny;
    double h;

    std::size_t size() const { return Nx * Ny; }
    std::size_t index(std::size_t i, std::size_t j) const { return j * Nx + i; }
    double x(std::size_t i) const { return (static_cast<double>(i) + 0.5) * h; }
    double y(std::size_t j) const { return (static_cast<double>(j) + 0.5) * h; }
    double cell_volume() const { return h * h; }
    double spacing() const { return h; }
    double domain_volume() const { return Lx * Ly; }
    double stencil_dimension() const { return 2.0; }
    Point2 center() const { return {0.5 * Lx, 0.5 * Ly}; }
};

/// Cell-centred values of the density u.
struct Field {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    double max() const;
    bool all_finite() const;
};

/// Radial bump u0 = c0 (1 - (rho/R0)^2)^3 for rho < R0, zero outside. It is
/// C^2 across rho = R0. Gradients and Laplacians are analytic.
struct InitialProfile {
    double c0 = 0.8;
    double R0 = 0.5;
    int dim = 2;                 // dimension used by laplacian()
    Point2 center{0.0, 0.0};     // Cartesian mode only

    double value(double rho) const;
    double radial_derivative(double rho) const;
    double second_radial_derivative(double rho) const;
    double gradient_norm(double rho) const;
    double laplacian(double rho) const;

    double max_value() const { return c0; }
    double max_gradient_norm() const;

    /// Radius at which u0 = v for 0 < v < c0; R0 for v <= 0 and 0 for v >= c0.
    double radius_at_level(double v) const;

    /// Throws GeometryError when c0 <= a or the support does not fit in a
    /// ball of radius `domain_radius`.
    void validate(double a, double domain_radius) const;
};

/// Sum of cell value times cell volume.
double integral(const RadialGrid& grid, const Field& u);
double integral(const CartesianGrid2D& grid, const Field& u);

Field build_u0(const RadialGrid& grid, const InitialProfile& profile, double a);
Field build_u0(const CartesianGrid2D& grid, const InitialProfile& profile, double a);

/// Radius r0 of the initial interface {u0 = a}. Throws when u0 never crosses a.
double gamma0_locate(const InitialProfile& profile, const BistableReaction& r);

struct Segment {
    Point2 p;
    Point2 q;
};

/// Level-a contour of a sampled Cartesian field by marching squares over the
/// cell centres. Throws GeometryError when the field never crosses the level.
std::vector<Segment> gamma0_locate(const CartesianGrid2D& grid, const Field& u0, double level);

/// Signed distance to Gamma0, positive outside (where u0 < a).
inline double dist_to_gamma0(double r0, double r) { return r - r0; }

double dist_to_gamma0(const std::vector<Segment>& gamma0, const InitialProfile& profile, double a,
                      Point2 x);

enum class Region { inner, band, outer };

/// Labels each cell as inside Gamma0 (Omega0^(1)), outside (Omega0^(0)) or
/// within `band` of it.
std::vector<Region> classify_regions(const RadialGrid& grid, double r0, double band);

} // namespace layergen
