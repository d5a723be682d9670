#include "relunet/landscape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "relunet/csv.hpp"

namespace relunet {

std::string to_string(SamplingStrategy s) { return s == SamplingStrategy::Uniform ? "uniform" : "network"; }

SamplingStrategy parse_sampling_strategy(const std::string& text) {
    if (text == "uniform") return SamplingStrategy::Uniform;
    if (text == "network") return SamplingStrategy::RandomNetwork;
    throw InvalidArgument("unknown sampling strategy: " + text);
}

ConeClassification classify_cone(const ActivationMatrix& A, const Dataset& ds, double lambda, double global_value,
                                  ObjectiveKind kind, const SolverOptions& opts) {
    ConeClassification c;
    c.global_value = global_value;
    const SolveResult sr = solve(build_cone_program(A, ds, lambda, kind), opts);
    c.cone_value = sr.objective_value;
    if (sr.status == SolveStatus::Infeasible) {
        c.infeasible = true;
        return c;
    }
    if (sr.status == SolveStatus::MaxIter) {
        c.max_iter = true;
        return c;
    }
    c.contains_global = sr.objective_value <= global_value + kGlobalTolerance;
    if (!c.contains_global) c.bad_local_stationary = stationarity_check(recover_network(sr), ds, lambda).is_stationary;
    return c;
}

bool classify_by_patterns(const ActivationMatrix& A, const std::vector<NeuronPattern>& sparse_support) {
    const std::set<NeuronPattern> rows(A.rows.begin(), A.rows.end());
    return std::all_of(sparse_support.begin(), sparse_support.end(),
                       [&](const NeuronPattern& p) { return rows.count(p) > 0; });
}

std::vector<NeuronPattern> solution_support(const SolveResult& sr, double rel_threshold) {
    double largest = 0.0;
    for (const auto& b : sr.beta) largest = std::max(largest, b.norm());
    std::vector<NeuronPattern> out;
    if (largest == 0.0) return out;
    for (std::size_t i = 0; i < sr.beta.size(); ++i)
        if (sr.beta[i].norm() > rel_threshold * largest) out.push_back(sr.rows[i]);
    return out;
}

std::uint64_t theorem1_m_threshold(std::int64_t n, std::int64_t d, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("theorem1_m_threshold: epsilon must be in (0,1)");
    const auto q = cover_count(n, d).convert_to<long double>();
    const long double value = q * std::log(static_cast<long double>(n + 1) / epsilon);
    if (value >= 1.8e19L) throw InvalidArgument("theorem1_m_threshold: value exceeds 64 bits");
    return static_cast<std::uint64_t>(std::ceil(value));
}

FractionBound theorem3_fraction(int p, int q, std::uint64_t m, bool with_signs) {
    if (p < 0 || q < 0) throw InvalidArgument("theorem3_fraction: counts must be >= 0");
    const double md = static_cast<double>(m);
    FractionBound fb;
    fb.upper_bound = md * std::exp2(-static_cast<double>(std::max(p, q)));
    const int s = with_signs ? 1 : 0;
    const double cp = std::exp2(-static_cast<double>(p + s));
    const double cq = std::exp2(-static_cast<double>(q + s));
    // Probability that no row covers the mask; empty masks need no row.
    const double miss_p = p == 0 ? 0.0 : std::pow(1.0 - cp, md);
    const double miss_q = q == 0 ? 0.0 : std::pow(1.0 - cq, md);
    double miss_both = 0.0;
    if (p > 0 && q > 0) {
        // A row with a sign can cover only one of the masks; without signs it
        // covers both exactly when its bits contain their union.
        const double neither = with_signs ? 1.0 - cp - cq : (1.0 - cp) * (1.0 - cq);
        miss_both = std::pow(neither, md);
    }
    fb.exact = m == 0 && (p > 0 || q > 0) ? 0.0 : 1.0 - miss_p - miss_q + miss_both;
    return fb;
}

unsigned resolve_thread_count(unsigned requested) {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    unsigned n = requested > 0 ? requested : hw;
    if (const char* env = std::getenv("RELU_LANDSCAPE_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
        } catch (const std::exception&) {
            // Ignore malformed values and keep the default.
        }
    }
    return std::max(1u, n);
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
    threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(count, 1)));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                job(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

namespace {

Summary summarize(const std::vector<double>& v) {
    Summary s;
    if (v.empty()) return s;
    s.min = *std::min_element(v.begin(), v.end());
    s.max = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = std::clamp(sum / static_cast<double>(v.size()), s.min, s.max);
    return s;
}

struct JobOutcome {
    ConeClassification cls;
    bool covered = false;
};

}  // namespace

LandscapeStats estimate_proportions(const StatsConfig& cfg, const DatasetGenerator& dataset_gen) {
    if (cfg.m_grid.empty()) throw InvalidArgument("estimate_proportions: empty m grid");
    if (cfg.num_cones < 1 || cfg.num_datasets < 1) throw InvalidArgument("estimate_proportions: counts must be >= 1");
    const unsigned threads = resolve_thread_count(cfg.threads);

    LandscapeStats stats;
    stats.lambda = cfg.lambda;
    stats.datasets.resize(cfg.num_datasets);
    std::vector<PatternSet> patterns(cfg.num_datasets);

    parallel_for(cfg.num_datasets, threads, [&](std::size_t r) {
        auto& rec = stats.datasets[r];
        rec.dataset = dataset_gen(r);
        const ConeProgram cp = global_program(rec.dataset, cfg.lambda, cfg.kind);
        rec.global = solve(cp, cfg.global_solver);
        if (rec.global.status != SolveStatus::Optimal)
            throw NumericalError("estimate_proportions: global program not solved (" + to_string(rec.global.status) +
                                 ")");
        rec.global_value = rec.global.objective_value;
        rec.support = solution_support(rec.global);
        if (cfg.strategy == SamplingStrategy::Uniform) patterns[r] = enumerate_patterns(rec.dataset);
    });
    stats.n = stats.datasets.front().dataset.n();
    stats.d = stats.datasets.front().dataset.d();
    stats.cover_count = cover_count(stats.n, stats.d).str();

    const std::size_t per_m = cfg.num_cones;
    const std::size_t per_dataset = per_m * cfg.m_grid.size();
    std::vector<JobOutcome> outcomes(per_dataset * cfg.num_datasets);
    parallel_for(outcomes.size(), threads, [&](std::size_t job) {
        const std::size_t r = job / per_dataset;
        const std::size_t mi = (job % per_dataset) / per_m;
        const std::size_t c = job % per_m;
        const auto& rec = stats.datasets[r];
        Rng rng = make_rng(cfg.seed, {r, mi, c});
        const std::size_t m = cfg.m_grid[mi];
        const ActivationMatrix A = cfg.strategy == SamplingStrategy::Uniform
                                       ? sample_cone_uniform(patterns[r], m, rng)
                                       : sample_cone_network(rec.dataset, m, rng);
        JobOutcome& out = outcomes[job];
        if (A.rows.empty()) {
            // The empty network is the only point of a zero-width cone.
            out.cls.global_value = rec.global_value;
            out.cls.cone_value = cfg.kind == ObjectiveKind::Regularized
                                     ? rec.dataset.labels.squaredNorm() / static_cast<double>(rec.dataset.n())
                                     : 0.0;
            out.cls.contains_global = out.cls.cone_value <= rec.global_value + kGlobalTolerance;
            out.covered = rec.support.empty();
            return;
        }
        out.cls = classify_cone(A, rec.dataset, cfg.lambda, rec.global_value, cfg.kind, cfg.cone_solver);
        out.covered = classify_by_patterns(A, rec.support);
    });

    for (std::size_t mi = 0; mi < cfg.m_grid.size(); ++mi) {
        LandscapeRow row;
        row.m = cfg.m_grid[mi];
        row.num_cones = per_m;
        row.num_datasets = cfg.num_datasets;
        std::vector<double> pg, pb;
        for (std::size_t r = 0; r < cfg.num_datasets; ++r) {
            std::size_t global = 0, bad = 0;
            for (std::size_t c = 0; c < per_m; ++c) {
                const auto& o = outcomes[r * per_dataset + mi * per_m + c];
                global += o.cls.contains_global;
                bad += o.cls.bad_local_stationary;
                row.max_iter_count += o.cls.max_iter;
                row.infeasible_count += o.cls.infeasible;
                row.pattern_covered += o.covered;
                row.pattern_counterexamples += o.covered && !o.cls.contains_global;
            }
            const double denom = static_cast<double>(per_m);
            pg.push_back(static_cast<double>(global) / denom);
            pb.push_back(static_cast<double>(bad) / denom);
            stats.datasets[r].prop_global.push_back(pg.back());
            stats.datasets[r].prop_bad.push_back(pb.back());
        }
        row.prop_global = summarize(pg);
        row.prop_bad = summarize(pb);
        stats.rows.push_back(row);
    }
    return stats;
}

void write_landscape_csv(std::ostream& out, const LandscapeStats& stats) {
    out << "# n=" << stats.n << ",d=" << stats.d << ",lambda=" << csv::format(stats.lambda)
        << ",cover_count=" << stats.cover_count << '\n';
    out << "m,prop_global_mean,prop_global_min,prop_global_max,prop_bad_mean,prop_bad_min,prop_bad_max\n";
    for (const auto& r : stats.rows) {
        out << r.m << ',' << csv::format(r.prop_global.mean) << ',' << csv::format(r.prop_global.min) << ','
            << csv::format(r.prop_global.max) << ',' << csv::format(r.prop_bad.mean) << ','
            << csv::format(r.prop_bad.min) << ',' << csv::format(r.prop_bad.max) << '\n';
    }
}

}  // namespace relunet
