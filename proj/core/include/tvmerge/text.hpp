// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace tvmerge {

// Shortest decimal string that parses back to exactly the same double.
// Deterministic (a pure function of the bits), so reports and CSV exports
// are byte-stable across runs.
std::string format_double(double v);

// RFC-4180 quoting for free-form CSV fields (tensor names may hold commas).
std::string csv_field(const std::string& s);

}  // namespace tvmerge
