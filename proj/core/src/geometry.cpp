#include <layergen/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace layergen {

namespace {

// |S^{N-1}| = 2 pi^{N/2} / Gamma(N/2)
double unit_sphere_area(int dim) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim);
}

} // namespace

RadialGrid::RadialGrid(int dim_, double radius, std::size_t cells) : dim(dim_), R(radius), Nr(cells) {
    if (dim < 2) throw GeometryError("radial grid dimension must be at least 2");
    if (!(R > 0.0)) throw GeometryError("radial grid radius must be positive");
    if (Nr < 16) throw GeometryError("radial grid needs at least 16 cells");
    dr = R / static_cast<double>(Nr);
    const double omega = unit_sphere_area(dim);
    faces.resize(Nr + 1);
    face_areas.resize(Nr + 1);
    for (std::size_t i = 0; i <= Nr; ++i) {
        faces[i] = static_cast<double>(i) * dr;
        face_areas[i] = omega * std::pow(faces[i], dim - 1);
    }
    faces[Nr] = R;
    centers.resize(Nr);
    volumes.resize(Nr);
    for (std::size_t i = 0; i < Nr; ++i) {
        centers[i] = 0.5 * (faces[i] + faces[i + 1]);
        volumes[i] = omega * (std::pow(faces[i + 1], dim) - std::pow(faces[i], dim)) / dim;
    }
}

double RadialGrid::domain_volume() const {
    return unit_sphere_area(dim) * std::pow(R, dim) / dim;
}

double RadialGrid::stencil_dimension() const {
    double d = 0.0;
    for (std::size_t i = 0; i < Nr; ++i) {
        d = std::max(d, (face_areas[i] + face_areas[i + 1]) * dr / (2.0 * volumes[i]));
    }
    return d;
}

CartesianGrid2D::CartesianGrid2D(double Lx_, double Ly_, std::size_t Nx_, std::size_t Ny_)
    : Lx(Lx_), Ly(Ly_), Nx(Nx_), Ny(Ny_) {
    if (!(Lx > 0.0 && Ly > 0.0)) throw GeometryError("box lengths must be positive");
    if (Nx < 16 || Ny < 16) throw GeometryError("Cartesian grid needs at least 16 cells per side");
    h = Lx / static_cast<double>(Nx);
    const double hy = Ly / static_cast<double>(Ny);
    if (std::abs(h - hy) > 1e-12 * h) throw GeometryError("Cartesian cells must be square (Lx/Nx == Ly/Ny)");
}

double Field::max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : values) m = std::max(m, v);
    return m;
}

bool Field::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double InitialProfile::value(double rho) const {
    if (rho >= R0) return 0.0;
    const double w = 1.0 - (rho / R0) * (rho / R0);
    return c0 * w * w * w;
}

double InitialProfile::radial_derivative(double rho) const {
    if (rho >= R0) return 0.0;
    const double w = 1.0 - (rho / R0) * (rho / R0);
    return -6.0 * c0 * rho * w * w / (R0 * R0);
}

double InitialProfile::second_radial_derivative(double rho) const {
    if (rho >= R0) return 0.0;
    const double s = (rho / R0) * (rho / R0);
    return -6.0 * c0 / (R0 * R0) * (1.0 - s) * (1.0 - 5.0 * s);
}

double InitialProfile::gradient_norm(double rho) const {
    return std::abs(radial_derivative(rho));
}

double InitialProfile::laplacian(double rho) const {
    if (rho >= R0) return 0.0;
    const double s = (rho / R0) * (rho / R0);
    return -6.0 * c0 / (R0 * R0) * (1.0 - s) * (dim - (dim + 4.0) * s);
}

double InitialProfile::max_gradient_norm() const {
    // |g'| peaks at s = 1/5
    return gradient_norm(R0 / std::sqrt(5.0));
}

double InitialProfile::radius_at_level(double v) const {
    if (v <= 0.0) return R0;
    if (v >= c0) return 0.0;
    return R0 * std::sqrt(1.0 - std::cbrt(v / c0));
}

void InitialProfile::validate(double a, double domain_radius) const {
    if (!(c0 > a)) {
        throw GeometryError("profile-inconsistent: peak c0 = " + std::to_string(c0) +
                            " must exceed a = " + std::to_string(a));
    }
    if (!(R0 > 0.0)) throw GeometryError("profile-inconsistent: R0 must be positive");
    if (!(R0 < domain_radius)) {
        throw GeometryError("profile-inconsistent: support radius R0 = " + std::to_string(R0) +
                            " must be inside the domain (" + std::to_string(domain_radius) + ")");
    }
}

double integral(const RadialGrid& grid, const Field& u) {
    if (u.size() != grid.size()) throw GeometryError("field size does not match grid");
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) s += grid.volumes[i] * u[i];
    return s;
}

double integral(const CartesianGrid2D& grid, const Field& u) {
    if (u.size() != grid.size()) throw GeometryError("field size does not match grid");
    double s = 0.0;
    for (double v : u.values) s += v;
    return s * grid.cell_volume();
}

Field build_u0(const RadialGrid& grid, const InitialProfile& profile, double a) {
    profile.validate(a, grid.R);
    Field u{std::vector<double>(grid.size())};
    for (std::size_t i = 0; i < grid.size(); ++i) u[i] = profile.value(grid.centers[i]);
    return u;
}

Field build_u0(const CartesianGrid2D& grid, const InitialProfile& profile, double a) {
    const auto c = profile.center;
    const double room = std::min({c[0], grid.Lx - c[0], c[1], grid.Ly - c[1]});
    profile.validate(a, room);
    Field u{std::vector<double>(grid.size())};
    for (std::size_t j = 0; j < grid.Ny; ++j) {
        for (std::size_t i = 0; i < grid.Nx; ++i) {
            u[grid.index(i, j)] = profile.value(std::hypot(grid.x(i) - c[0], grid.y(j) - c[1]));
        }
    }
    return u;
}

double gamma0_locate(const InitialProfile& profile, const BistableReaction& r) {
    const double a = r.a();
    if (!(profile.c0 > a)) {
        throw GeometryError("u0 never exceeds a, so Gamma0 is empty or degenerate");
    }
    return profile.radius_at_level(a);
}

std::vector<Segment> gamma0_locate(const CartesianGrid2D& grid, const Field& u0, double level) {
    if (u0.size() != grid.size()) throw GeometryError("field size does not match grid");
    std::vector<Segment> out;
    auto lerp = [&](Point2 p, Point2 q, double vp, double vq) {
        const double t = (level - vp) / (vq - vp);
        return Point2{p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])};
    };
    for (std::size_t j = 0; j + 1 < grid.Ny; ++j) {
        for (std::size_t i = 0; i + 1 < grid.Nx; ++i) {
            // corners counter-clockwise from bottom-left
            const Point2 p[4] = {{grid.x(i), grid.y(j)},
                                 {grid.x(i + 1), grid.y(j)},
                                 {grid.x(i + 1), grid.y(j + 1)},
                                 {grid.x(i), grid.y(j + 1)}};
            const double v[4] = {u0[grid.index(i, j)], u0[grid.index(i + 1, j)],
                                 u0[grid.index(i + 1, j + 1)], u0[grid.index(i, j + 1)]};
            int mask = 0;
            for (int k = 0; k < 4; ++k) {
                if (v[k] > level) mask |= 1 << k;
            }
            if (mask == 0 || mask == 15) continue;
            // crossing points on each edge k: corner k -> corner k+1
            Point2 cross[4];
            bool has[4];
            for (int k = 0; k < 4; ++k) {
                const int l = (k + 1) % 4;
                has[k] = ((mask >> k) & 1) != ((mask >> l) & 1);
                if (has[k]) cross[k] = lerp(p[k], p[l], v[k], v[l]);
            }
            int edges[4];
            int n = 0;
            for (int k = 0; k < 4; ++k) {
                if (has[k]) edges[n++] = k;
            }
            if (n == 2) {
                out.push_back({cross[edges[0]], cross[edges[1]]});
            } else {
                // saddle: decide by the average of the corners
                const double mid = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                const bool corner0_high = (mask & 1) != 0;
                if ((mid > level) == corner0_high) {
                    out.push_back({cross[0], cross[1]});
                    out.push_back({cross[2], cross[3]});
                } else {
                    out.push_back({cross[3], cross[0]});
                    out.push_back({cross[1], cross[2]});
                }
            }
        }
    }
    if (out.empty()) throw GeometryError("u0 never crosses the interface level");
    return out;
}

namespace {

double point_segment_distance(Point2 x, const Segment& s) {
    const double dx = s.q[0] - s.p[0], dy = s.q[1] - s.p[1];
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((x[0] - s.p[0]) * dx + (x[1] - s.p[1]) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(x[0] - (s.p[0] + t * dx), x[1] - (s.p[1] + t * dy));
}

} // namespace

double dist_to_gamma0(const std::vector<Segment>& gamma0, const InitialProfile& profile, double a,
                      Point2 x) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& s : gamma0) d = std::min(d, point_segment_distance(x, s));
    const double u = profile.value(std::hypot(x[0] - profile.center[0], x[1] - profile.center[1]));
    return u > a ? -d : d;
}

std::vector<Region> classify_regions(const RadialGrid& grid, double r0, double band) {
    std::vector<Region> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = dist_to_gamma0(r0, grid.centers[i]);
        if (std::abs(d) < band) out[i] = Region::band;
        else out[i] = d < 0.0 ? Region::inner : Region::outer;
    }
    return out;
}

} // namespace layergen
