#pragma once

#include <layergen/geometry.hpp>
#include <layergen/solver.hpp>

#include <json.hpp>

#include <filesystem>
#include <span>
#include <string>

namespace layergen::cli {

using Json = nlohmann::ordered_json;

/// Serialises with every floating value at 17 significant digits, keys in
/// insertion order, two-space indentation. NaN and infinities become null.
std::string to_json_text(const Json& j);

/// 17 significant digits.
std::string fmt_real(double x);

/// Writes `content` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& content);

/// Snapshot tables: (t, r, u) for radial grids, (t, x, y, u) for boxes.
std::string snapshots_csv(std::span<const Snapshot> snapshots, const RadialGrid& grid);
std::string snapshots_csv(std::span<const Snapshot> snapshots, const CartesianGrid2D& grid);

/// Directory name used for one value of eps.
std::string eps_label(double eps);

} // namespace layergen::cli
