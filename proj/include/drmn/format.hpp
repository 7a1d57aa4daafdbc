#pragma once

#include <string>

namespace drmn {

/// Shortest decimal text that parses back to exactly `x`; "nan"/"inf"
/// for non-finite values.
std::string format_double(double x);

/// Quote a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& s);

}  // namespace drmn
