#pragma once

#include <string>

namespace cmit {

/// Verbosity from the CMIT_LOG environment variable: 0 quiet, 1 info
/// (default), 2 debug.
int log_level();

void log_info(const std::string& msg);
void log_debug(const std::string& msg);
void log_error(const std::string& msg);

}  // namespace cmit
