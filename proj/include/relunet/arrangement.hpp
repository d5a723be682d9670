#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "relunet/data.hpp"

namespace relunet {

// Data bits are packed into one word, so datasets are limited to 64 points.
constexpr int kMaxPoints = 64;
using DataBits = std::uint64_t;

inline bool bit(DataBits bits, int k) { return ((bits >> k) & 1U) != 0; }
inline DataBits full_mask(int n) { return n >= 64 ? ~DataBits{0} : ((DataBits{1} << n) - 1); }

// Activation descriptor of one neuron: bit k is 1[w . x_k >= 0], sign is 1[a >= 0].
struct NeuronPattern {
    DataBits data_bits = 0;
    bool sign_bit = true;

    auto operator<=>(const NeuronPattern&) const = default;
};

// "0110" + sign char; character k is data bit k.
std::string bits_to_string(DataBits bits, int n);
DataBits bits_from_string(const std::string& text);

struct PatternSet {
    int n = 0;
    std::vector<DataBits> patterns;  // sorted ascending, distinct
    std::vector<Vector> witnesses;   // witnesses[j] realizes patterns[j] strictly
    double witness_margin = 1e-9;

    std::size_t size() const { return patterns.size(); }
};

struct ActivationMatrix {
    int n = 0;
    std::vector<NeuronPattern> rows;

    std::size_t m() const { return rows.size(); }
};

struct EnumerationOptions {
    double witness_margin = 1e-9;
    std::size_t max_patterns = 1000000;
};

NeuronPattern pattern_of(const Vector& w, double a, const Dataset& ds);

// Exact list of realizable data-bit vectors by incremental hyperplane
// insertion. Throws InvalidArgument on degenerate data or above the cap.
PatternSet enumerate_patterns(const Dataset& ds, const EnumerationOptions& opts = {});

// 4 * sum_{i=0}^{d-1} C(n-1, i): number of nonempty neuron cones (with sign).
boost::multiprecision::cpp_int cover_count(std::int64_t n, std::int64_t d);
// Same value; throws if it does not fit in 64 bits.
std::uint64_t cover_count_u64(std::int64_t n, std::int64_t d);

ActivationMatrix sample_cone_uniform(const PatternSet& ps, std::size_t m, Rng& rng);
ActivationMatrix sample_cone_network(const Dataset& ds, std::size_t m, Rng& rng);

struct LabelMasks {
    DataBits pos = 0;
    DataBits neg = 0;
};
LabelMasks winning_patterns(const Dataset& ds);

bool contains_covering_row(const ActivationMatrix& A, DataBits mask, std::optional<bool> required_sign = std::nullopt);

void write_pattern_set_csv(std::ostream& out, const PatternSet& ps);
void write_activation_matrix_csv(std::ostream& out, const ActivationMatrix& A);
ActivationMatrix read_activation_matrix_csv(std::istream& in);

}  // namespace relunet
