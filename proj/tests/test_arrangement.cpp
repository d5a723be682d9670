#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "relunet/arrangement.hpp"

using namespace relunet;
using boost::multiprecision::cpp_int;

namespace {

// Independent count: Pascal's triangle in big integers.
cpp_int cover_oracle(int n, int d) {
    std::vector<std::vector<cpp_int>> c(static_cast<std::size_t>(n), std::vector<cpp_int>(static_cast<std::size_t>(n), 0));
    for (int i = 0; i < n; ++i) {
        c[i][0] = 1;
        for (int j = 1; j <= i; ++j) c[i][j] = c[i - 1][j - 1] + (j < i ? c[i - 1][j] : cpp_int(0));
    }
    cpp_int s = 0;
    for (int i = 0; i < d && i < n; ++i) s += c[n - 1][i];
    return 4 * s;
}

}  // namespace

TEST_CASE("cover count") {
    CHECK(cover_count(4, 2) == 16);
    CHECK(cover_count(8, 2) == 32);
    CHECK(cover_count(6, 3) == 64);
    CHECK(cover_count(4, 4) == 32);
    CHECK(cover_count(8, 20) == 4 * 128);
    for (int n = 1; n <= 40; n += 3)
        for (int d = 1; d <= 12; d += 2) CHECK(cover_count(n, d) == cover_oracle(n, d));
    CHECK(cover_count(200, 60) == cover_oracle(200, 60));
    CHECK_THROWS(cover_count_u64(200, 60));
    CHECK(cover_count_u64(6, 3) == 64);
}

TEST_CASE("enumeration matches the cover count and random directions find nothing new") {
    const std::vector<std::pair<int, int>> sizes = {{4, 2}, {8, 2}, {6, 3}, {4, 4}, {7, 3}};
    for (auto [n, d] : sizes) {
        const Dataset ds = gen_gaussian_teacher(n, d, 5, derive_seed(21, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(d)}));
        const PatternSet ps = enumerate_patterns(ds);
        CHECK(cpp_int(ps.size()) * 2 == cover_count(n, d));
        CHECK(std::is_sorted(ps.patterns.begin(), ps.patterns.end()));
        CHECK(std::adjacent_find(ps.patterns.begin(), ps.patterns.end()) == ps.patterns.end());
        for (std::size_t j = 0; j < ps.size(); ++j) {
            CHECK(pattern_of(ps.witnesses[j], 1.0, ds).data_bits == ps.patterns[j]);
            CHECK((ds.points * ps.witnesses[j]).cwiseAbs().minCoeff() > 0.0);
        }
        const std::set<DataBits> known(ps.patterns.begin(), ps.patterns.end());
        Rng rng = make_rng(99, {static_cast<std::uint64_t>(n)});
        std::size_t outside = 0;
        Vector w(d);
        for (int s = 0; s < 100000; ++s) {
            for (int j = 0; j < d; ++j) w[j] = gaussian(rng);
            if (!known.count(pattern_of(w, 1.0, ds).data_bits)) ++outside;
        }
        CHECK(outside == 0);
    }
}

TEST_CASE("patterns use the closed convention") {
    Dataset ds;
    ds.points = (Matrix(3, 2) << 1, 0, 0, 1, -1, -1).finished();
    ds.labels = Vector::Zero(3);
    const NeuronPattern p = pattern_of((Vector(2) << 1, 0).finished(), -0.5, ds);
    CHECK(p.data_bits == 0b011);  // w.x_2 = 0 counts as active
    CHECK_FALSE(p.sign_bit);
    CHECK(pattern_of(Vector::Zero(2), 0.0, ds).data_bits == 0b111);
    CHECK(pattern_of(Vector::Zero(2), 0.0, ds).sign_bit);
}

TEST_CASE("degenerate data is rejected by the enumerator") {
    Dataset ds = gen_gaussian_teacher(5, 2, 3, 4);
    ds.points.row(2) = -3.0 * ds.points.row(0);
    CHECK_THROWS_AS(enumerate_patterns(ds), InvalidArgument);
}

TEST_CASE("uniform cone sampling is uniform over patterns and signs") {
    const Dataset ds = gen_gaussian_teacher(6, 2, 5, 3);
    const PatternSet ps = enumerate_patterns(ds);
    Rng rng = make_rng(4);
    const std::size_t draws = 60000;
    const ActivationMatrix A = sample_cone_uniform(ps, draws, rng);
    REQUIRE(A.m() == draws);
    std::map<std::pair<DataBits, bool>, std::size_t> counts;
    for (const auto& r : A.rows) ++counts[{r.data_bits, r.sign_bit}];
    const double cells = 2.0 * static_cast<double>(ps.size());
    CHECK(counts.size() == static_cast<std::size_t>(cells));
    const double expected = static_cast<double>(draws) / cells;
    double chi2 = 0.0;
    for (const auto& [k, c] : counts) chi2 += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    const boost::math::chi_squared dist(cells - 1.0);
    CHECK(chi2 < boost::math::quantile(dist, 0.999));
}

TEST_CASE("network sampling draws realizable patterns and is reproducible") {
    const Dataset ds = gen_gaussian_teacher(7, 3, 5, 8);
    const PatternSet ps = enumerate_patterns(ds);
    const std::set<DataBits> known(ps.patterns.begin(), ps.patterns.end());
    Rng r1 = make_rng(5), r2 = make_rng(5);
    const ActivationMatrix a = sample_cone_network(ds, 500, r1);
    const ActivationMatrix b = sample_cone_network(ds, 500, r2);
    CHECK(a.rows == b.rows);
    for (const auto& row : a.rows) CHECK(known.count(row.data_bits) == 1);
}

TEST_CASE("winning masks and covering rows") {
    Dataset ds;
    ds.points = Matrix::Identity(4, 4);
    ds.labels = (Vector(4) << 1.0, -2.0, 0.0, 3.0).finished();
    const LabelMasks m = winning_patterns(ds);
    CHECK(m.pos == 0b1001);
    CHECK(m.neg == 0b0010);
    ActivationMatrix A;
    A.n = 4;
    A.rows = {{0b1011, false}, {0b0110, true}};
    CHECK(contains_covering_row(A, m.pos));
    CHECK_FALSE(contains_covering_row(A, m.pos, true));
    CHECK(contains_covering_row(A, m.neg, true));
    CHECK(contains_covering_row(A, 0));
}

TEST_CASE("activation matrix text round trips") {
    CHECK(bits_to_string(0b0110, 4) == "0110");
    CHECK(bits_from_string("0110") == 0b0110);
    ActivationMatrix A;
    A.n = 5;
    A.rows = {{0b10101, true}, {0b00000, false}, {0b11111, true}};
    std::stringstream s;
    write_activation_matrix_csv(s, A);
    const ActivationMatrix back = read_activation_matrix_csv(s);
    CHECK(back.n == 5);
    CHECK(back.rows == A.rows);
}
