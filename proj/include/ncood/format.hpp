#pragma once

#include <string>

namespace ncood {

/// Shortest decimal text that reads back to the identical double.
std::string format_double(double value);

}  // namespace ncood
