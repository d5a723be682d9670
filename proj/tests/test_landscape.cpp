#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "relunet/landscape.hpp"

using namespace relunet;

namespace {

// Monte Carlo coverage frequency with rows uniform over all 2^n bit vectors and both signs.
double coverage_frequency(int n, DataBits pos, DataBits neg, std::size_t m, bool with_signs, std::size_t trials, Rng& rng) {
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        ActivationMatrix A;
        A.n = n;
        for (std::size_t i = 0; i < m; ++i) A.rows.push_back({uniform_index(rng, DataBits{1} << n), coin(rng)});
        const bool cp = pos == 0 || contains_covering_row(A, pos, with_signs ? std::optional<bool>(true) : std::nullopt);
        const bool cq = neg == 0 || contains_covering_row(A, neg, with_signs ? std::optional<bool>(false) : std::nullopt);
        hits += cp && cq;
    }
    return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace

TEST_CASE("width threshold") {
    // 16 ln(50) = 62.59...
    CHECK(theorem1_m_threshold(4, 2, 0.1) == 63);
    CHECK(theorem1_m_threshold(8, 20, 0.5) == static_cast<std::uint64_t>(std::ceil(512.0 * std::log(18.0))));
    CHECK_THROWS_AS(theorem1_m_threshold(4, 2, 0.0), InvalidArgument);
    CHECK_THROWS_AS(theorem1_m_threshold(4, 2, 1.0), InvalidArgument);
}

TEST_CASE("covering probability matches Monte Carlo in both sign conventions") {
    Rng rng = make_rng(31);
    const int n = 6;
    const DataBits pos = 0b000111, neg = 0b011000;  // p = 3, q = 2, one zero label
    const std::size_t trials = 40000;
    for (bool with_signs : {true, false}) {
        for (std::size_t m : {1, 4, 16, 64}) {
            const FractionBound fb = theorem3_fraction(3, 2, m, with_signs);
            const double freq = coverage_frequency(n, pos, neg, m, with_signs, trials, rng);
            const double sigma = std::sqrt(std::max(fb.exact * (1.0 - fb.exact), 1e-4) / static_cast<double>(trials));
            CHECK(std::abs(freq - fb.exact) <= 4.0 * sigma);
        }
    }
}

TEST_CASE("covering probability properties") {
    for (int p = 0; p <= 6; ++p)
        for (int q = 0; q <= 6; ++q)
            for (std::uint64_t m : {0ULL, 1ULL, 3ULL, 10ULL, 100ULL, 10000ULL}) {
                const FractionBound s = theorem3_fraction(p, q, m, true);
                const FractionBound u = theorem3_fraction(p, q, m, false);
                CHECK(s.exact >= -1e-15);
                CHECK(s.exact <= u.exact + 1e-15);
                CHECK(u.exact <= 1.0 + 1e-15);
                if (p + q > 0) CHECK(u.exact <= std::min(1.0, u.upper_bound) + 1e-15);
                CHECK(s.upper_bound == u.upper_bound);
                if (m > 0) CHECK(theorem3_fraction(p, q, m + 1, true).exact >= s.exact - 1e-15);
            }
    CHECK(theorem3_fraction(0, 0, 0, true).exact == 1.0);
    CHECK(theorem3_fraction(1, 0, 1, false).exact == doctest::Approx(0.5));
    CHECK(theorem3_fraction(1, 0, 1, true).exact == doctest::Approx(0.25));
    CHECK(theorem3_fraction(2, 3, 4, false).upper_bound == doctest::Approx(0.5));
}

TEST_CASE("a cone containing the global support contains a global minimum") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const Dataset ds = gen_gaussian_teacher(5, 2, 10, seed);
        const SolveResult g = global_optimum(ds, 0.01, ObjectiveKind::Regularized, {1e-10, 200000, 1e-9});
        const std::vector<NeuronPattern> support = solution_support(g);
        REQUIRE_FALSE(support.empty());
        ActivationMatrix A;
        A.n = 5;
        A.rows = support;
        A.rows.push_back({0, true});
        CHECK(classify_by_patterns(A, support));
        const ConeClassification c = classify_cone(A, ds, 0.01, g.objective_value);
        CHECK(c.contains_global);
        CHECK_FALSE(c.bad_local_stationary);
        CHECK(c.cone_value >= g.objective_value - kGlobalTolerance);

        // Property: pattern coverage implies containing a global minimum.
        const PatternSet ps = enumerate_patterns(ds);
        Rng rng = make_rng(seed, {1});
        for (int t = 0; t < 40; ++t) {
            ActivationMatrix B = sample_cone_uniform(ps, 1 + uniform_index(rng, 30), rng);
            if (!classify_by_patterns(B, support)) continue;
            CHECK(classify_cone(B, ds, 0.01, g.objective_value).contains_global);
        }
    }
}

TEST_CASE("one neuron on four points is usually a bad stationary cone") {
    const Dataset ds = gen_gaussian_teacher(4, 2, 10, 3);
    const double global = global_optimum(ds, 0.01, ObjectiveKind::Regularized, {1e-10, 200000, 1e-9}).objective_value;
    const PatternSet ps = enumerate_patterns(ds);
    std::size_t bad = 0, good = 0;
    for (DataBits bits : ps.patterns)
        for (bool sign : {true, false}) {
            ActivationMatrix A;
            A.n = 4;
            A.rows = {{bits, sign}};
            const ConeClassification c = classify_cone(A, ds, 0.01, global);
            CHECK_FALSE(c.max_iter);
            CHECK_FALSE((c.contains_global && c.bad_local_stationary));
            bad += c.bad_local_stationary;
            good += c.contains_global;
        }
    CHECK(bad > 0);
    CHECK(bad + good <= 2 * ps.size());
}

TEST_CASE("estimates do not depend on the thread count") {
    StatsConfig cfg;
    cfg.num_cones = 15;
    cfg.num_datasets = 2;
    cfg.m_grid = {1, 4, 16};
    cfg.seed = 77;
    auto gen = [](std::size_t r) { return gen_gaussian_teacher(4, 2, 10, derive_seed(3, {r})); };
    cfg.threads = 1;
    const LandscapeStats a = estimate_proportions(cfg, gen);
    cfg.threads = 3;
    const LandscapeStats b = estimate_proportions(cfg, gen);
    std::ostringstream sa, sb;
    write_landscape_csv(sa, a);
    write_landscape_csv(sb, b);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().rfind("# n=4,d=2,lambda=0.01", 0) == 0);
    CHECK(sa.str().find("cover_count=16") != std::string::npos);
    CHECK(sa.str().find("m,prop_global_mean,prop_global_min,prop_global_max,prop_bad_mean,prop_bad_min,prop_bad_max") !=
          std::string::npos);
    REQUIRE(a.rows.size() == 3);
    for (const auto& r : a.rows) {
        CHECK(r.prop_global.min <= r.prop_global.mean);
        CHECK(r.prop_global.mean <= r.prop_global.max);
        CHECK(r.prop_global.mean + r.prop_bad.mean <= 1.0 + 1e-12);
        CHECK(r.pattern_counterexamples == 0);
    }
    CHECK(a.cover_count == "16");

    cfg.strategy = SamplingStrategy::RandomNetwork;
    const LandscapeStats net = estimate_proportions(cfg, gen);
    CHECK(net.rows.size() == 3);
}

TEST_CASE("thread pool and configuration helpers") {
    std::vector<int> hit(100, 0);
    parallel_for(100, 4, [&](std::size_t i) { hit[i] += 1; });
    CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                        if (i == 7) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
    setenv("RELU_LANDSCAPE_THREADS", "2", 1);
    CHECK(resolve_thread_count(8) == 2);
    CHECK(resolve_thread_count(1) == 1);
    unsetenv("RELU_LANDSCAPE_THREADS");
    CHECK(resolve_thread_count(5) == 5);
    CHECK(parse_sampling_strategy(to_string(SamplingStrategy::RandomNetwork)) == SamplingStrategy::RandomNetwork);
    CHECK(parse_sampling_strategy("uniform") == SamplingStrategy::Uniform);
    CHECK_THROWS_AS(parse_sampling_strategy("greedy"), InvalidArgument);
}
