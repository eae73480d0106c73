#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace layergen::cli {

/// Raised for unknown keys, malformed values and invariant violations. The
/// message always starts with the offending key path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key, const std::string& what)
        : std::runtime_error(key + ": " + what), key_(key) {}

    const std::string& key() const { return key_; }

private:
    std::string key_;
};

inline constexpr const char* schema_version = "layergen-output/1";

struct RunConfig {
    struct {
        std::string kind = "cubic";
        double a = 0.3;
        double delta = 0.0;
    } reaction;
    struct {
        std::string mode = "radial";  // radial | cartesian2d
        int N = 2;
        double R = 1.0;
        std::size_t Nr = 2048;
        std::size_t Nx = 384;
        std::size_t Ny = 384;
        double Lx = 1.5;
        double Ly = 1.5;
    } grid;
    struct {
        double c0 = 0.8;
        double R0 = 0.5;
    } profile;
    struct {
        int m = 2;
        double eps = 0.01;
        double cfl_safety = 0.4;
        double t_end_factor = 2.0;  // in units of t_eps
    } solver;
    struct {
        double tol = 1e-10;
        double dtau_max = 0.5;
    } kernel;
    struct {
        std::size_t space_samples = 40;
        std::size_t time_samples = 40;
    } envelope;
    struct {
        double gamma = 0.1;
        double eta = 0.1;
        double sandwich_tol = 5e-3;
    } verify;
    struct {
        std::vector<double> eps_list{0.02, 0.01, 0.005};
    } sweep;
    struct {
        std::string dir = "out";
        std::string format = "csv+json";  // csv | json | csv+json
    } output;
    std::uint64_t seed = 20240611;

    bool write_csv() const { return output.format != "json"; }
    bool write_json() const { return output.format != "csv"; }
};

/// Every accepted key, in echo order.
const std::vector<std::string>& config_keys();

/// Sets one dotted key from its textual value. Throws ConfigError.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Parses "key = value" lines; '#' starts a comment. Lists are written as
/// [x, y, ...]. A key may appear at most once.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");

/// Reads `path` (empty path: defaults), applies `overrides` of the form
/// key=value in order, then validates.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

/// Checks every module invariant the configuration touches.
void validate(const RunConfig& cfg);

/// The effective configuration in the input format, preceded by the schema
/// version. Parsing it back yields the same configuration.
std::string echo_config(const RunConfig& cfg);

} // namespace layergen::cli
