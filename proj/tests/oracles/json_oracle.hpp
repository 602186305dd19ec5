#pragma once

// Reference strict-JSON recognizer used only by tests. Written from the
// RFC 8259 grammar without sharing code with the library parser.

#include <string_view>

namespace oracle {

bool valid_json(std::string_view text, int max_depth = 64);

}  // namespace oracle
