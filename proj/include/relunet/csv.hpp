#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace relunet::csv {

// 17 significant digits, '.' separator; round-trips every double.
std::string format(double value);

std::vector<std::string> split(std::string_view line, char sep = ',');

double parse_double(const std::string& field);

// Opens `path` for writing and throws on failure. Output uses LF endings.
std::ofstream open_output(const std::string& path);

}  // namespace relunet::csv
