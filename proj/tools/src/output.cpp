#include <layergen/cli/output.hpp>

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace layergen::cli {

namespace {

void emit(const Json& j, std::string& out, int indent) {
    const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent), ' ');
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ",\n";
            first = false;
            out += pad + Json(it.key()).dump() + ": ";
            emit(it.value(), out, indent + 2);
        }
        out += "\n" + close_pad + "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        bool first = true;
        for (const auto& v : j) {
            if (!first) out += ",\n";
            first = false;
            out += pad;
            emit(v, out, indent + 2);
        }
        out += "\n" + close_pad + "]";
        return;
    }
    case Json::value_t::number_float: {
        const double x = j.get<double>();
        out += std::isfinite(x) ? fmt_real(x) : "null";
        return;
    }
    default:
        out += j.dump();
    }
}

} // namespace

std::string fmt_real(double x) { return fmt::format("{:.17g}", x); }

std::string to_json_text(const Json& j) {
    std::string out;
    emit(j, out, 0);
    out += "\n";
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

std::string snapshots_csv(std::span<const Snapshot> snapshots, const RadialGrid& grid) {
    std::string out = "t,r,u\n";
    for (const auto& s : snapshots) {
        const std::string t = fmt_real(s.t);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            out += fmt::format("{},{:.17g},{:.17g}\n", t, grid.centers[i], s.field[i]);
        }
    }
    return out;
}

std::string snapshots_csv(std::span<const Snapshot> snapshots, const CartesianGrid2D& grid) {
    std::string out = "t,x,y,u\n";
    for (const auto& s : snapshots) {
        const std::string t = fmt_real(s.t);
        for (std::size_t j = 0; j < grid.Ny; ++j) {
            for (std::size_t i = 0; i < grid.Nx; ++i) {
                out += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", t, grid.x(i), grid.y(j), s.field[grid.index(i, j)]);
            }
        }
    }
    return out;
}

std::string eps_label(double eps) { return fmt::format("{:g}", eps); }

} // namespace layergen::cli
