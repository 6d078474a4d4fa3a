#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

namespace switchctl {

/// 17 significant digits ("%.17g"). Negative zero prints as 0 so artifacts do
/// not depend on the sign of a cancelled sum.
std::string format_double(double value);

/// Serializes with sorted keys, two-space indentation and doubles through
/// format_double. Non-finite doubles become null.
std::string dump_json(const nlohmann::json& value);

}  // namespace switchctl
