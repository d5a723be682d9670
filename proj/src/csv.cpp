#include "relunet/csv.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace relunet::csv {

std::string format(double value) {
    char buf[40];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", value);
    return std::string(buf, static_cast<std::size_t>(len));
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

double parse_double(const std::string& field) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("csv: not a number: '" + field + "'");
    }
    if (used != field.size()) throw std::invalid_argument("csv: trailing characters in '" + field + "'");
    return v;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

}  // namespace relunet::csv
