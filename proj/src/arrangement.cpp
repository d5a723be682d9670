#include "relunet/arrangement.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "relunet/csv.hpp"
#include "relunet/linprog.hpp"

namespace relunet {

namespace {

void check_point_count(Eigen::Index n) {
    if (n > kMaxPoints) throw InvalidArgument("datasets with more than 64 points are not supported");
}

struct Cell {
    DataBits bits = 0;
    Vector witness;
};

double relative_margin(const Vector& w, const Vector& x) {
    const double scale = w.norm() * x.norm();
    return scale > 0.0 ? w.dot(x) / scale : 0.0;
}

}  // namespace

std::string bits_to_string(DataBits bits, int n) {
    std::string s(static_cast<std::size_t>(n), '0');
    for (int k = 0; k < n; ++k)
        if (bit(bits, k)) s[static_cast<std::size_t>(k)] = '1';
    return s;
}

DataBits bits_from_string(const std::string& text) {
    if (text.size() > static_cast<std::size_t>(kMaxPoints)) throw InvalidArgument("bit string longer than 64");
    DataBits bits = 0;
    for (std::size_t k = 0; k < text.size(); ++k) {
        if (text[k] == '1') bits |= DataBits{1} << k;
        else if (text[k] != '0') throw InvalidArgument("bit string must contain only 0/1: " + text);
    }
    return bits;
}

NeuronPattern pattern_of(const Vector& w, double a, const Dataset& ds) {
    check_point_count(ds.n());
    NeuronPattern p;
    for (Eigen::Index k = 0; k < ds.n(); ++k)
        if (ds.points.row(k).dot(w) >= 0.0) p.data_bits |= DataBits{1} << k;
    p.sign_bit = a >= 0.0;
    return p;
}

PatternSet enumerate_patterns(const Dataset& ds, const EnumerationOptions& opts) {
    const auto n = ds.n();
    const auto d = ds.d();
    check_point_count(n);
    if (n < 1) throw InvalidArgument("enumerate_patterns: empty dataset");
    const auto gp = validate_general_position(ds);
    if (!gp.general_position)
        throw InvalidArgument("enumerate_patterns: points are not in general position (min normalized |det| = " +
                              csv::format(gp.min_abs_det) + (gp.has_zero_point ? ", zero point present)" : ")"));
    if (cover_count(n, d) / 2 > opts.max_patterns)
        throw InvalidArgument("enumerate_patterns: pattern count exceeds cap of " + std::to_string(opts.max_patterns));

    std::vector<Cell> cells{Cell{0, Vector::Zero(d)}};
    Matrix rows(0, d);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Vector xk = ds.point(k);
        Matrix next_rows(k + 1, d);
        next_rows.topRows(k) = rows;
        next_rows.row(k) = xk.transpose();
        std::vector<Cell> next;
        next.reserve(cells.size() * 2);
        for (const Cell& cell : cells) {
            const double rel = relative_margin(cell.witness, xk);
            for (int side : {+1, -1}) {
                DataBits bits = cell.bits;
                if (side > 0) bits |= DataBits{1} << k;
                if (side * rel >= opts.witness_margin) {
                    next.push_back(Cell{bits, cell.witness});
                    continue;
                }
                Eigen::VectorXi signs(k + 1);
                for (Eigen::Index j = 0; j < k; ++j) signs[j] = bit(cell.bits, static_cast<int>(j)) ? 1 : -1;
                signs[k] = side;
                const MarginWitness mw = max_margin_witness(next_rows, signs);
                if (!mw.feasible) continue;
                const double wn = mw.w.norm();
                bool interior = wn > 0.0;
                for (Eigen::Index j = 0; j <= k && interior; ++j)
                    interior = signs[j] * relative_margin(mw.w, next_rows.row(j).transpose()) >= opts.witness_margin;
                if (interior) next.push_back(Cell{bits, mw.w / wn});
            }
        }
        if (next.size() > opts.max_patterns) throw InvalidArgument("enumerate_patterns: cap exceeded");
        cells = std::move(next);
        rows = std::move(next_rows);
    }

    std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) { return x.bits < y.bits; });
    PatternSet ps;
    ps.n = static_cast<int>(n);
    ps.witness_margin = opts.witness_margin;
    for (auto& c : cells) {
        if (!ps.patterns.empty() && ps.patterns.back() == c.bits) continue;
        ps.patterns.push_back(c.bits);
        ps.witnesses.push_back(std::move(c.witness));
    }
    return ps;
}

boost::multiprecision::cpp_int cover_count(std::int64_t n, std::int64_t d) {
    if (n < 1 || d < 1) throw InvalidArgument("cover_count: n and d must be >= 1");
    using boost::multiprecision::cpp_int;
    cpp_int binom = 1;  // C(n-1, i)
    cpp_int sum = 0;
    for (std::int64_t i = 0; i <= d - 1 && i <= n - 1; ++i) {
        sum += binom;
        binom = binom * (n - 1 - i) / (i + 1);
    }
    return 4 * sum;
}

std::uint64_t cover_count_u64(std::int64_t n, std::int64_t d) {
    const auto c = cover_count(n, d);
    if (c > std::numeric_limits<std::uint64_t>::max()) throw InvalidArgument("cover_count overflows 64 bits");
    return c.convert_to<std::uint64_t>();
}

ActivationMatrix sample_cone_uniform(const PatternSet& ps, std::size_t m, Rng& rng) {
    if (ps.patterns.empty()) throw InvalidArgument("sample_cone_uniform: empty pattern set");
    ActivationMatrix A;
    A.n = ps.n;
    A.rows.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto j = uniform_index(rng, ps.patterns.size());
        A.rows.push_back(NeuronPattern{ps.patterns[j], coin(rng)});
    }
    return A;
}

ActivationMatrix sample_cone_network(const Dataset& ds, std::size_t m, Rng& rng) {
    check_point_count(ds.n());
    ActivationMatrix A;
    A.n = static_cast<int>(ds.n());
    A.rows.reserve(m);
    Vector w(ds.d());
    for (std::size_t i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < ds.d(); ++j) w[j] = gaussian(rng);
        const double a = gaussian(rng);
        A.rows.push_back(pattern_of(w, a, ds));
    }
    return A;
}

LabelMasks winning_patterns(const Dataset& ds) {
    check_point_count(ds.n());
    LabelMasks masks;
    for (Eigen::Index k = 0; k < ds.n(); ++k) {
        if (ds.labels[k] > 0.0) masks.pos |= DataBits{1} << k;
        else if (ds.labels[k] < 0.0) masks.neg |= DataBits{1} << k;
    }
    return masks;
}

bool contains_covering_row(const ActivationMatrix& A, DataBits mask, std::optional<bool> required_sign) {
    return std::any_of(A.rows.begin(), A.rows.end(), [&](const NeuronPattern& p) {
        return (p.data_bits & mask) == mask && (!required_sign || p.sign_bit == *required_sign);
    });
}

void write_pattern_set_csv(std::ostream& out, const PatternSet& ps) {
    const auto d = ps.witnesses.empty() ? 0 : ps.witnesses.front().size();
    out << "pattern_bits";
    for (Eigen::Index j = 0; j < d; ++j) out << ",witness_" << (j + 1);
    out << '\n';
    for (std::size_t i = 0; i < ps.size(); ++i) {
        out << bits_to_string(ps.patterns[i], ps.n);
        for (Eigen::Index j = 0; j < d; ++j) out << ',' << csv::format(ps.witnesses[i][j]);
        out << '\n';
    }
}

void write_activation_matrix_csv(std::ostream& out, const ActivationMatrix& A) {
    for (const auto& row : A.rows) out << bits_to_string(row.data_bits, A.n) << (row.sign_bit ? '1' : '0') << '\n';
}

ActivationMatrix read_activation_matrix_csv(std::istream& in) {
    ActivationMatrix A;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.size() < 2) throw InvalidArgument("activation matrix row needs data bits and a sign bit");
        const int n = static_cast<int>(line.size()) - 1;
        if (first) {
            A.n = n;
            first = false;
        } else if (n != A.n) {
            throw InvalidArgument("activation matrix rows have different lengths");
        }
        const char s = line.back();
        if (s != '0' && s != '1') throw InvalidArgument("activation matrix sign bit must be 0/1");
        A.rows.push_back(NeuronPattern{bits_from_string(line.substr(0, static_cast<std::size_t>(n))), s == '1'});
    }
    return A;
}

}  // namespace relunet
