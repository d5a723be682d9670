#include "relunet/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "relunet/arrangement.hpp"
#include "relunet/conic.hpp"
#include "relunet/csv.hpp"
#include "relunet/flow.hpp"
#include "relunet/landscape.hpp"
#include "relunet/theory.hpp"

namespace relunet::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double x) { return csv::format(x); }

std::string brief(double x) {
    std::ostringstream s;
    s << x;
    return s.str();
}

void write_manifest(const fs::path& path, const std::string& subcommand, std::uint64_t seed, const json& config,
                    const std::vector<std::string>& args, const std::vector<std::string>& outputs) {
    json m;
    m["subcommand"] = subcommand;
    m["tool_version"] = kToolVersion;
    m["master_seed"] = seed;
    m["config"] = config;
    m["argv"] = args;
    m["outputs"] = outputs;
    std::ofstream f = csv::open_output(path.string());
    f << m.dump(2) << '\n';
}

std::ofstream open_in(const fs::path& dir, const std::string& name, std::vector<std::string>& outputs) {
    const fs::path p = dir / name;
    outputs.push_back(p.string());
    return csv::open_output(p.string());
}

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace

Dataset generate(DatasetKind kind, Eigen::Index n, Eigen::Index d, std::uint64_t seed, double eta, double noise_std,
                 Eigen::Index teacher_width) {
    switch (kind) {
        case DatasetKind::GaussianTeacher:
            return gen_gaussian_teacher(n, d, teacher_width, seed);
        case DatasetKind::Orthogonal: {
            Rng rng = make_rng(seed, {5});
            const TeacherNetwork teacher = random_teacher(teacher_width, d, rng);
            return gen_orthogonal(n, d, teacher, seed);
        }
        case DatasetKind::Assumption1:
            if (n != 0 && n != d) throw InvalidArgument("assumption1 data has n = d");
            return gen_assumption1(d, eta, noise_std, seed);
    }
    throw InvalidArgument("unknown dataset kind");
}

Dataset DatasetSource::make(std::size_t replicate) const {
    if (from_file) return read_dataset_csv(path);
    return generate(kind, n, d, derive_seed(seed, {replicate}), eta, noise_std, teacher_width);
}

std::string DatasetSource::describe() const {
    if (from_file) return path;
    std::ostringstream s;
    s << to_string(kind) << ":n=" << n << ",d=" << d << ",seed=" << seed << ",eta=" << fmt(eta)
      << ",noise_std=" << fmt(noise_std) << ",teacher_width=" << teacher_width;
    return s.str();
}

DatasetSource parse_dataset_source(const std::string& text, std::uint64_t default_seed) {
    DatasetSource src;
    src.seed = default_seed;
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    DatasetKind kind{};
    bool is_kind = true;
    try {
        kind = parse_dataset_kind(head);
    } catch (const InvalidArgument&) {
        is_kind = false;
    }
    if (!is_kind) {
        if (!fs::exists(text)) throw InvalidArgument("dataset is neither a file nor a kind spec: " + text);
        src.from_file = true;
        src.path = text;
        return src;
    }
    src.kind = kind;
    if (colon != std::string::npos) {
        for (const auto& item : csv::split(text.substr(colon + 1), ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw InvalidArgument("dataset spec entries must be key=value: " + item);
            const std::string key = trim(item.substr(0, eq));
            const std::string value = trim(item.substr(eq + 1));
            if (key == "n") src.n = static_cast<Eigen::Index>(parse_count(value));
            else if (key == "d") src.d = static_cast<Eigen::Index>(parse_count(value));
            else if (key == "seed") src.seed = parse_count(value);
            else if (key == "eta") src.eta = csv::parse_double(value);
            else if (key == "noise_std" || key == "noise-std") src.noise_std = csv::parse_double(value);
            else if (key == "teacher_width" || key == "teacher-width")
                src.teacher_width = static_cast<Eigen::Index>(parse_count(value));
            else throw InvalidArgument("unknown dataset spec key: " + key);
        }
    }
    if (src.kind == DatasetKind::Assumption1 && src.n == 0) src.n = src.d;
    if (src.n < 1 || src.d < 1) throw InvalidArgument("dataset spec needs n and d: " + text);
    return src;
}

std::vector<double> parse_alpha_grid(const std::string& text) {
    auto parse_one = [](const std::string& s) -> double {
        const std::string t = trim(s);
        if (t.rfind("2^", 0) == 0) return std::exp2(csv::parse_double(t.substr(2)));
        return csv::parse_double(t);
    };
    std::vector<double> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const std::string a = trim(text.substr(0, dots));
        const std::string b = trim(text.substr(dots + 2));
        if (a.rfind("2^", 0) != 0 || b.rfind("2^", 0) != 0)
            throw InvalidArgument("alpha ranges must use powers of two, e.g. 2^-1..2^-9");
        const double ea = csv::parse_double(a.substr(2));
        const double eb = csv::parse_double(b.substr(2));
        if (ea != std::floor(ea) || eb != std::floor(eb)) throw InvalidArgument("alpha range exponents must be integers");
        const int step = ea <= eb ? 1 : -1;
        for (int e = static_cast<int>(ea);; e += step) {
            out.push_back(std::exp2(e));
            if (e == static_cast<int>(eb)) break;
        }
        return out;
    }
    for (const auto& item : csv::split(text, ',')) out.push_back(parse_one(item));
    if (out.empty()) throw InvalidArgument("empty alpha grid");
    return out;
}

std::uint64_t parse_count(const std::string& text) {
    const double v = csv::parse_double(trim(text));
    if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) throw InvalidArgument("not a nonnegative integer: " + text);
    return static_cast<std::uint64_t>(v);
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    for (const auto& item : csv::split(text, ',')) out.push_back(static_cast<std::size_t>(parse_count(item)));
    if (out.empty()) throw InvalidArgument("empty list");
    return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file: " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidArgument("config lines must be key=value: " + line);
        std::string key = trim(line.substr(0, eq));
        while (!key.empty() && key[0] == '-') key.erase(0, 1);
        out.emplace_back(key, trim(line.substr(eq + 1)));
    }
    return out;
}

namespace {

// ---------------------------------------------------------------- gen-data

struct GenDataOptions {
    std::string kind;
    std::int64_t n = 0;
    std::int64_t d = 0;
    std::uint64_t seed = 0;
    double eta = 1e-3;
    double noise_std = 1e-3;
    std::int64_t teacher_width = 10;
    std::string out = "dataset.csv";
};

int cmd_gen_data(const GenDataOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    const DatasetKind kind = parse_dataset_kind(o.kind);
    std::int64_t n = o.n;
    if (kind == DatasetKind::Assumption1) {
        if (n == 0) n = o.d;
    } else if (n == 0) {
        throw UsageError("--n is required for kind " + o.kind);
    }
    const Dataset ds = generate(kind, n, o.d, o.seed, o.eta, o.noise_std, o.teacher_width);
    const fs::path path(o.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_dataset_csv(path.string(), ds);
    json cfg = {{"kind", o.kind}, {"n", n},        {"d", o.d},         {"seed", o.seed},
                {"eta", o.eta},   {"noise_std", o.noise_std}, {"teacher_width", o.teacher_width}};
    const fs::path manifest = path.parent_path() / (path.stem().string() + ".manifest.json");
    write_manifest(manifest, "gen-data", o.seed, cfg, args, {path.string()});
    out << "wrote " << path.string() << " (" << ds.n() << " points, d=" << ds.d() << ")\n";
    return kOk;
}

// --------------------------------------------------------------- landscape

struct LandscapeOptions {
    std::string dataset;
    double lambda = 0.01;
    std::string m_grid = "1,2,4,8,16,32,64,128";
    std::uint64_t cones = 100;
    std::uint64_t replicates = 5;
    std::string strategy = "uniform";
    std::string objective = "regularized";
    double epsilon = 0.1;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out_dir = ".";
};

int cmd_landscape(const LandscapeOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    const DatasetSource src = parse_dataset_source(o.dataset, o.seed);
    StatsConfig cfg;
    cfg.num_cones = o.cones;
    cfg.num_datasets = o.replicates;
    cfg.epsilon = o.epsilon;
    cfg.lambda = o.lambda;
    cfg.m_grid = parse_size_list(o.m_grid);
    cfg.strategy = parse_sampling_strategy(o.strategy);
    if (o.objective == "regularized") cfg.kind = ObjectiveKind::Regularized;
    else if (o.objective == "minnorm") cfg.kind = ObjectiveKind::MinNorm;
    else throw UsageError("--objective must be regularized or minnorm");
    cfg.seed = o.seed;
    cfg.threads = o.threads;
    const LandscapeStats stats = estimate_proportions(cfg, [&](std::size_t r) { return src.make(r); });

    const fs::path dir(o.out_dir);
    fs::create_directories(dir);
    std::vector<std::string> outputs;
    {
        auto f = open_in(dir, "landscape.csv", outputs);
        write_landscape_csv(f, stats);
    }
    {
        auto f = open_in(dir, "landscape_details.csv", outputs);
        f << "m,num_cones,num_datasets,max_iter,infeasible,pattern_covered,pattern_counterexamples\n";
        for (const auto& r : stats.rows)
            f << r.m << ',' << r.num_cones << ',' << r.num_datasets << ',' << r.max_iter_count << ','
              << r.infeasible_count << ',' << r.pattern_covered << ',' << r.pattern_counterexamples << '\n';
    }
    const std::uint64_t threshold = theorem1_m_threshold(stats.n, stats.d, cfg.epsilon);
    json jcfg = {{"dataset", src.describe()}, {"lambda", o.lambda},       {"m_grid", cfg.m_grid},
                 {"cones", o.cones},          {"replicates", o.replicates}, {"strategy", o.strategy},
                 {"objective", o.objective},  {"epsilon", o.epsilon},      {"threads", o.threads},
                 {"cover_count", stats.cover_count}, {"theorem1_m_threshold", threshold}};
    write_manifest(dir / "manifest.json", "landscape", o.seed, jcfg, args, outputs);

    out << "cover_count(" << stats.n << "," << stats.d << ") = " << stats.cover_count << '\n';
    out << "theorem1 m threshold (epsilon=" << brief(cfg.epsilon) << ") = " << threshold << '\n';
    std::size_t failures = 0;
    for (const auto& r : stats.rows) {
        out << "m=" << r.m << " prop_global=" << brief(r.prop_global.mean) << " prop_bad=" << brief(r.prop_bad.mean);
        if (r.max_iter_count) out << " max_iter=" << r.max_iter_count;
        if (r.infeasible_count) out << " infeasible=" << r.infeasible_count;
        out << '\n';
        failures += r.max_iter_count;
    }
    return failures ? kNumericalFailure : kOk;
}

// ------------------------------------------------------------------- train

struct TrainOptionsCli {
    std::string dataset;
    std::string alpha_grid = "2^-1..2^-9";
    double lambda = 1e-5;
    double lr = 0.01;
    std::uint64_t width = 100;
    std::string max_epochs = "1e8";
    std::uint64_t replicates = 5;
    std::string init = "gaussian";
    double grad_sq_stop = 1e-16;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out_dir = ".";
};

Summary summarize_values(const std::vector<double>& v) {
    Summary s;
    s.min = *std::min_element(v.begin(), v.end());
    s.max = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = std::clamp(sum / static_cast<double>(v.size()), s.min, s.max);
    return s;
}

int cmd_train(const TrainOptionsCli& o, const std::vector<std::string>& args, std::ostream& out) {
    const DatasetSource src = parse_dataset_source(o.dataset, o.seed);
    const std::vector<double> alphas = parse_alpha_grid(o.alpha_grid);
    const std::uint64_t max_epochs = parse_count(o.max_epochs);
    const InitMode init = parse_init_mode(o.init);
    if (o.replicates < 1) throw UsageError("--replicates must be >= 1");
    const unsigned threads = resolve_thread_count(o.threads);

    std::vector<Dataset> datasets(o.replicates);
    std::vector<double> global_values(o.replicates);
    SolverOptions sopts;
    sopts.tol = 1e-10;
    sopts.max_iterations = 2000000;
    parallel_for(o.replicates, threads, [&](std::size_t r) {
        datasets[r] = src.make(r);
        const SolveResult g = global_optimum(datasets[r], o.lambda, ObjectiveKind::Regularized, sopts);
        if (g.status != SolveStatus::Optimal) throw NumericalError("global optimum not reached for replicate " + std::to_string(r));
        global_values[r] = g.objective_value;
    });

    const std::size_t jobs = alphas.size() * o.replicates;
    std::vector<TrainResult> results(jobs);
    parallel_for(jobs, threads, [&](std::size_t j) {
        const std::size_t ai = j / o.replicates;
        const std::size_t r = j % o.replicates;
        TrainConfig cfg;
        cfg.alpha = alphas[ai];
        cfg.lambda = o.lambda;
        cfg.lr = o.lr;
        cfg.width = static_cast<Eigen::Index>(o.width);
        cfg.max_epochs = max_epochs;
        cfg.grad_sq_stop = o.grad_sq_stop;
        cfg.seed = derive_seed(o.seed, {r, 1});
        cfg.init_mode = init;
        results[j] = train(cfg, datasets[r], global_values[r]);
    });

    const fs::path dir(o.out_dir);
    fs::create_directories(dir);
    std::vector<std::string> outputs;
    bool diverged = false;
    for (std::size_t j = 0; j < jobs; ++j) {
        auto f = open_in(dir, "series_a" + std::to_string(j / o.replicates) + "_r" + std::to_string(j % o.replicates) + ".csv",
                         outputs);
        write_series_csv(f, results[j].series);
        diverged = diverged || results[j].diverged;
    }
    {
        auto fs_net = open_in(dir, "net_size.csv", outputs);
        auto fs_gap = open_in(dir, "reg_loss_distance.csv", outputs);
        fs_net << "alpha,net_size_mean,net_size_min,net_size_max\n";
        fs_gap << "alpha,reg_loss_distance_mean,reg_loss_distance_min,reg_loss_distance_max\n";
        for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
            std::vector<double> sizes, gaps;
            for (std::size_t r = 0; r < o.replicates; ++r) {
                sizes.push_back(results[ai * o.replicates + r].theta_sq_norm);
                gaps.push_back(results[ai * o.replicates + r].gap);
            }
            const Summary s = summarize_values(sizes);
            const Summary g = summarize_values(gaps);
            fs_net << fmt(alphas[ai]) << ',' << fmt(s.mean) << ',' << fmt(s.min) << ',' << fmt(s.max) << '\n';
            fs_gap << fmt(alphas[ai]) << ',' << fmt(g.mean) << ',' << fmt(g.min) << ',' << fmt(g.max) << '\n';
        }
    }
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        auto f = open_in(dir, "directions_a" + std::to_string(ai) + ".csv", outputs);
        f << "epoch,num_pos_neurons_mean\n";
        std::vector<std::uint64_t> epochs;
        for (std::size_t r = 0; r < o.replicates; ++r)
            for (const auto& row : results[ai * o.replicates + r].series) epochs.push_back(row.epoch);
        std::sort(epochs.begin(), epochs.end());
        epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());
        for (auto e : epochs) {
            // Runs that stopped earlier contribute their last logged value.
            double sum = 0.0;
            for (std::size_t r = 0; r < o.replicates; ++r) {
                const auto& series = results[ai * o.replicates + r].series;
                auto it = std::upper_bound(series.begin(), series.end(), e,
                                           [](std::uint64_t x, const MetricsRow& row) { return x < row.epoch; });
                sum += static_cast<double>((it == series.begin() ? series.front() : *std::prev(it)).num_pos_neurons);
            }
            f << e << ',' << fmt(sum / static_cast<double>(o.replicates)) << '\n';
        }
    }
    {
        auto f = open_in(dir, "runs.csv", outputs);
        f << "alpha,replicate,epochs_run,converged,diverged,mse,reg_loss,theta_sq_norm,gap,distinct_directions,"
             "balance_drift,dead_steps_checked,dead_decay_violations,negative_side_violations,sign_flips\n";
        for (std::size_t j = 0; j < jobs; ++j) {
            const auto& res = results[j];
            f << fmt(alphas[j / o.replicates]) << ',' << j % o.replicates << ',' << res.epochs_run << ','
              << res.converged << ',' << res.diverged << ',' << fmt(res.mse) << ',' << fmt(res.reg_loss) << ','
              << fmt(res.theta_sq_norm) << ',' << fmt(res.gap) << ',' << distinct_directions(res.theta) << ','
              << fmt(res.theta.balance_drift()) << ',' << res.invariants.dead_steps_checked << ','
              << res.invariants.dead_decay_violations << ',' << res.invariants.negative_side_violations << ','
              << res.invariants.sign_flips << '\n';
        }
    }
    json jcfg = {{"dataset", src.describe()}, {"alphas", alphas},          {"lambda", o.lambda},
                 {"lr", o.lr},                {"width", o.width},          {"max_epochs", max_epochs},
                 {"replicates", o.replicates}, {"init", o.init},           {"grad_sq_stop", o.grad_sq_stop},
                 {"threads", o.threads},      {"global_values", global_values}};
    write_manifest(dir / "manifest.json", "train", o.seed, jcfg, args, outputs);
    for (std::size_t j = 0; j < jobs; ++j) {
        const auto& res = results[j];
        out << "alpha=" << brief(alphas[j / o.replicates]) << " replicate=" << j % o.replicates
            << " epochs=" << res.epochs_run << (res.converged ? " converged" : "") << (res.diverged ? " DIVERGED" : "")
            << " gap=" << brief(res.gap) << " theta_sq_norm=" << brief(res.theta_sq_norm) << '\n';
    }
    return diverged ? kNumericalFailure : kOk;
}

// ------------------------------------------------------------------ theory

struct TheoryOptions {
    std::string dataset;
    double lambda = 1e-5;
    std::string alpha;  // empty: skip the alpha-dependent checks
    double epsilon = 0.5;
    std::uint64_t width = 20;
    std::uint64_t trials = 100000;
    double cone_epsilon = 0.1;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

int cmd_theory(const TheoryOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    const DatasetSource src = parse_dataset_source(o.dataset, o.seed);
    const Dataset ds = src.from_file ? src.make(0) : generate(src.kind, src.n, src.d, src.seed, src.eta, src.noise_std,
                                                              src.teacher_width);
    double alpha = 0.0;
    if (!o.alpha.empty()) {
        const auto grid = parse_alpha_grid(o.alpha);
        if (grid.size() != 1 || !(grid[0] > 0.0)) throw UsageError("--alpha takes one positive value");
        alpha = grid[0];
    }
    std::vector<BoundReport> reports;
    auto add = [&](BoundReport r) { reports.push_back(std::move(r)); };
    auto make = [](std::string name, double bound, double emp, bool ok) {
        BoundReport r;
        r.name = std::move(name);
        r.bound_value = bound;
        r.empirical_value = emp;
        r.satisfied = ok;
        return r;
    };

    out << "dataset: " << src.describe() << " (n=" << ds.n() << ", d=" << ds.d() << ")\n";
    const bool square = ds.n() == ds.d() && ds.d() >= 3;
    if (square) {
        const TheoryContext ctx = make_theory_context(ds, o.lambda);
        const CovarianceSpectrum spec = covariance_spectrum(ds);
        out << "mu_min=" << brief(ctx.mu_min) << " mu_max=" << brief(ctx.mu_max)
            << " eigen_distinct=" << spec.eigen_distinct << " vstar_full_support=" << spec.vstar_full_support << '\n';
        for (auto& r : proposition1_check(ctx)) add(r);
        if (ctx.u_star.nonzero) {
            add(make("u_star_norm_condition", 1e-10, ctx.u_star.norm_residual, ctx.u_star.norm_residual <= 1e-10));
            add(make("u_star_alignment_condition", 1e-10, ctx.u_star.align_residual,
                     ctx.u_star.align_residual <= 1e-10));
            Rng rng = make_rng(o.seed, {7});
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (int t = 0; t < 5; ++t) {
                std::vector<double> w(4);
                for (auto& x : w) x = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
                const Network member = theta_ustar_member(ctx.u_star.u, w, 6);
                const double L = regularized_loss(member, ds.points, ds.labels, o.lambda);
                lo = std::min(lo, L);
                hi = std::max(hi, L);
            }
            add(make("L_star_invariance_spread", 1e-10, hi - lo, hi - lo <= 1e-10));
            add(make("L_star_matches_members", 1e-10, std::abs(lo - ctx.L_lambda_star),
                     std::abs(lo - ctx.L_lambda_star) <= 1e-10));
            for (auto& r : rank2_construction(ctx, ds).checks) add(r);
            out << "u_star=" << ctx.u_star.u.transpose() << "\nL_lambda_star=" << brief(ctx.L_lambda_star)
                << " zeta=" << brief(ctx.zeta) << '\n';
        } else {
            BoundReport r;
            r.name = "u_star_nonzero";
            r.bound_value = (ctx.H * ctx.v_star).norm();
            r.empirical_value = o.lambda;
            r.satisfied = false;
            add(r);
        }
        Rng rng = make_rng(o.seed, {8});
        add(init_probability(static_cast<Eigen::Index>(o.width), o.trials, ds, rng));
        if (alpha > 0.0) {
            const double limit = ctx.mu_min * std::pow(alpha, o.epsilon);
            add(make("lambda_below_mu_min_alpha_eps", limit, o.lambda, o.lambda <= limit));
            const GammaT1 g = gamma_and_T1(ds, alpha, o.epsilon / 2.0);
            out << "gamma=" << g.gamma.transpose() << " T1=" << brief(g.T1) << '\n';
        }
    }
    const LambdaThreshold lt = theorem3_lambda_threshold(ds);
    out << "theorem3 lambda threshold=" << brief(lt.value) << " (nonzero outputs proven below " << brief(lt.proof_value)
        << ")" << (lt.applicable ? "" : " (labels of one sign only)") << '\n';
    if (ds.kind == DatasetKind::Orthogonal) {
        if (lt.applicable && o.lambda <= lt.value) {
            const SolveResult g = global_optimum(ds, o.lambda, ObjectiveKind::Regularized, SolverOptions{1e-10, 2000000, 1e-9});
            add(lemma_d3_check(ds, o.lambda, recover_network(g)));
        } else {
            add(lemma_d3_check(ds, o.lambda, Network::zeros(1, ds.d())));
        }
        const LabelMasks masks = winning_patterns(ds);
        const int p = std::popcount(masks.pos), q = std::popcount(masks.neg);
        for (std::uint64_t m : {1ULL, 16ULL, 256ULL, 4096ULL}) {
            const auto f = theorem3_fraction(p, q, m, true);
            out << "theorem3 fraction m=" << m << " bound=" << brief(f.upper_bound) << " exact(with signs)=" << brief(f.exact)
                << '\n';
        }
    }
    if (ds.n() <= kMaxPoints)
        out << "theorem1 m threshold (epsilon=" << brief(o.cone_epsilon)
            << ") = " << theorem1_m_threshold(ds.n(), ds.d(), o.cone_epsilon) << '\n';

    const fs::path dir(o.out_dir);
    fs::create_directories(dir);
    std::vector<std::string> outputs;
    {
        auto f = open_in(dir, "theory.csv", outputs);
        write_bound_reports_csv(f, reports);
    }
    json jcfg = {{"dataset", src.describe()}, {"lambda", o.lambda}, {"alpha", alpha}, {"epsilon", o.epsilon},
                 {"width", o.width},          {"trials", o.trials}, {"cone_epsilon", o.cone_epsilon}};
    write_manifest(dir / "manifest.json", "theory", o.seed, jcfg, args, outputs);
    bool all_ok = true;
    for (const auto& r : reports) {
        out << (r.skipped ? "SKIP " : (r.satisfied ? "ok   " : "FAIL ")) << r.name << " bound=" << brief(r.bound_value);
        if (r.empirical_value) out << " value=" << fmt(*r.empirical_value);
        if (!r.note.empty()) out << " (" << r.note << ")";
        out << '\n';
        all_ok = all_ok && r.satisfied;
    }
    return all_ok ? kOk : kNumericalFailure;
}

// Appends `--key value` for config entries not already given on the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a file");
            config_path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (config_path.empty()) return args;
    for (const auto& [key, value] : read_config_file(config_path)) {
        const std::string flag = "--" + key;
        const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (!given) {
            args.push_back(flag);
            args.push_back(value);
        }
    }
    return args;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args(argv, argv + argc);
    try {
        args = expand_config(args);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }

    CLI::App app{"Loss-landscape and training-dynamics toolkit for two-layer ReLU networks", "relunet"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    app.footer("All flags can also be given as key=value lines in a file passed with --config.");

    GenDataOptions gd;
    auto* sub_gen = app.add_subcommand("gen-data", "Generate a dataset CSV");
    sub_gen->add_option("--kind", gd.kind, "gaussian-teacher | orthogonal | assumption1")->required();
    sub_gen->add_option("--n", gd.n, "Number of points (implied by --d for assumption1)");
    sub_gen->add_option("--d", gd.d, "Input dimension")->required();
    sub_gen->add_option("--seed", gd.seed, "Seed");
    sub_gen->add_option("--eta", gd.eta, "Assumption-1 closeness parameter");
    sub_gen->add_option("--noise-std", gd.noise_std, "Assumption-1 noise standard deviation");
    sub_gen->add_option("--teacher-width", gd.teacher_width, "Width of the labeling teacher");
    sub_gen->add_option("--out", gd.out, "Output CSV path");

    LandscapeOptions ls;
    auto* sub_land = app.add_subcommand("landscape", "Estimate cone proportions containing global / bad local minima");
    sub_land->add_option("--dataset", ls.dataset, "CSV file or kind spec, e.g. gaussian-teacher:n=4,d=2")->required();
    sub_land->add_option("--lambda", ls.lambda, "Regularization strength");
    sub_land->add_option("--m-grid", ls.m_grid, "Comma-separated widths");
    sub_land->add_option("--cones", ls.cones, "Cones sampled per width and dataset");
    sub_land->add_option("--replicates", ls.replicates, "Number of datasets");
    sub_land->add_option("--strategy", ls.strategy, "uniform | network");
    sub_land->add_option("--objective", ls.objective, "regularized | minnorm");
    sub_land->add_option("--epsilon", ls.epsilon, "Failure fraction for the width threshold");
    sub_land->add_option("--seed", ls.seed, "Master seed");
    sub_land->add_option("--threads", ls.threads, "Worker threads (0 = default)");
    sub_land->add_option("--out-dir", ls.out_dir, "Output directory");

    TrainOptionsCli tr;
    auto* sub_train = app.add_subcommand("train", "Gradient descent runs over a grid of initialization scales");
    sub_train->add_option("--dataset", tr.dataset, "CSV file or kind spec")->required();
    sub_train->add_option("--alpha-grid", tr.alpha_grid, "e.g. 2^-1..2^-9 or 0.5,0.01");
    sub_train->add_option("--lambda", tr.lambda, "Regularization strength");
    sub_train->add_option("--lr", tr.lr, "Learning rate");
    sub_train->add_option("--width", tr.width, "Number of neurons");
    sub_train->add_option("--max-epochs", tr.max_epochs, "Epoch cap, e.g. 1e6");
    sub_train->add_option("--replicates", tr.replicates, "Runs per initialization scale");
    sub_train->add_option("--init", tr.init, "gaussian | sphere");
    sub_train->add_option("--grad-sq-stop", tr.grad_sq_stop, "Stop when the squared gradient norm falls below this");
    sub_train->add_option("--seed", tr.seed, "Master seed");
    sub_train->add_option("--threads", tr.threads, "Worker threads (0 = default)");
    sub_train->add_option("--out-dir", tr.out_dir, "Output directory");

    TheoryOptions th;
    auto* sub_theory = app.add_subcommand("theory", "Closed-form checks and bound evaluations");
    sub_theory->add_option("--dataset", th.dataset, "CSV file or kind spec")->required();
    sub_theory->add_option("--lambda", th.lambda, "Regularization strength");
    sub_theory->add_option("--alpha", th.alpha, "Initialization scale for the alpha-dependent checks, e.g. 2^-9");
    sub_theory->add_option("--epsilon", th.epsilon, "Small-initialization exponent epsilon in (0, 1/2]");
    sub_theory->add_option("--width", th.width, "Width for the initialization probability");
    sub_theory->add_option("--trials", th.trials, "Monte Carlo trials for the initialization probability");
    sub_theory->add_option("--cone-epsilon", th.cone_epsilon, "Failure fraction for the width threshold");
    sub_theory->add_option("--seed", th.seed, "Seed");
    sub_theory->add_option("--out-dir", th.out_dir, "Output directory");

    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kOk;
        }
        app.exit(e, out, err);
        return kUsageError;
    }

    try {
        if (*sub_gen) return cmd_gen_data(gd, args, out);
        if (*sub_land) return cmd_landscape(ls, args, out);
        if (*sub_train) return cmd_train(tr, args, out);
        if (*sub_theory) return cmd_theory(th, args, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\nRun with --help for more information.\n";
        return kUsageError;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\nRun with --help for more information.\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalFailure;
    }
    return kUsageError;
}

}  // namespace relunet::cli
