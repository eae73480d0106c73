#pragma once

#include <string>
#include <vector>

namespace layergen {

/// A named check failure. Checks that report rather than throw return a list
/// of these; an empty list means the check passed.
struct Diagnostic {
    std::string code;
    std::string message;
};

using Diagnostics = std::vector<Diagnostic>;

inline bool passed(const Diagnostics& d) { return d.empty(); }

} // namespace layergen
