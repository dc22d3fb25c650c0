#pragma once

#include <string>

#include "mgrkit/mgr.hpp"

namespace mgrkit {

/// Parses a strategy document. Unknown keys are rejected with an error that
/// names the offending key and its location.
MgrStrategy strategy_from_json_text(const std::string& text);
MgrStrategy strategy_from_json_file(const std::string& path);

std::string strategy_to_json_text(const MgrStrategy& strategy);
void strategy_to_json_file(const MgrStrategy& strategy, const std::string& path);

}  // namespace mgrkit
