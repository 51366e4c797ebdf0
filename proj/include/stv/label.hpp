#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace stv {

/// Patch label. Enumeration order is also the tie-break order of the trees.
enum class Label3 { normal = 0, path_lu = 1, path_hu = 2 };

inline constexpr int kLabelCount = 3;

std::string_view to_string(Label3 label);
std::optional<Label3> parse_label(std::string_view text);

/// Binary tag fed to the aggregation: HU -> 1, LU and NORMAL -> 0.
inline int remap_lu(Label3 label) { return label == Label3::path_hu ? 1 : 0; }

}  // namespace stv
