#pragma once

#include <string>
#include <string_view>

namespace armorcage {

// Drops every character outside [a-zA-Z0-9]. Use on values that end up
// spliced into code, such as model formulas or ticker symbols.
std::string sanitize_identifier(std::string_view input);

}  // namespace armorcage
