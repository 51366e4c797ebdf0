#include "stv/label.hpp"

namespace stv {

std::string_view to_string(Label3 label) {
    switch (label) {
        case Label3::normal: return "NORMAL";
        case Label3::path_lu: return "PATH_LU";
        case Label3::path_hu: return "PATH_HU";
    }
    return "?";
}

std::optional<Label3> parse_label(std::string_view text) {
    if (text == "NORMAL") return Label3::normal;
    if (text == "PATH_LU") return Label3::path_lu;
    if (text == "PATH_HU") return Label3::path_hu;
    return std::nullopt;
}

}  // namespace stv
