#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "relunet/cli.hpp"

using namespace relunet;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "relunet");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch_root() { return fs::temp_directory_path() / ("relunet_cli_" + std::to_string(getpid())); }

// Removes the scratch root when the test binary exits.
struct ScratchCleanup {
    ~ScratchCleanup() {
        std::error_code ec;
        fs::remove_all(scratch_root(), ec);
    }
} cleanup;

fs::path scratch(const std::string& name) {
    const fs::path p = scratch_root() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    const Run missing = run_cli({"gen-data", "--kind", "gaussian-teacher", "--d", "2"});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("--n") != std::string::npos);
    CHECK(missing.err.find("--help") != std::string::npos);
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"fly"}).code == 2);
    CHECK(run_cli({"gen-data", "--kind", "spiral", "--n", "3", "--d", "2"}).code == 2);
    CHECK(run_cli({"landscape", "--dataset", "gaussian-teacher:n=4"}).code == 2);
    CHECK(run_cli({"train", "--dataset", "assumption1:d=3", "--alpha-grid", "2^-1..0.3"}).code == 2);
    CHECK(run_cli({"gen-data", "--kind", "orthogonal", "--n", "3", "--d", "2", "--config", "/nonexistent.cfg"}).code == 2);
    const Run help = run_cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("landscape") != std::string::npos);
    CHECK(run_cli({"--version"}).out.find(cli::kToolVersion) != std::string::npos);
}

TEST_CASE("gen-data is reproducible and writes a manifest") {
    const fs::path dir = scratch("gen");
    const std::vector<std::string> args = {"gen-data", "--kind", "orthogonal", "--n", "8", "--d", "20", "--seed", "5"};
    auto a = args;
    a.insert(a.end(), {"--out", (dir / "a.csv").string()});
    auto b = args;
    b.insert(b.end(), {"--out", (dir / "b.csv").string()});
    REQUIRE(run_cli(a).code == 0);
    REQUIRE(run_cli(b).code == 0);
    const std::string text = slurp(dir / "a.csv");
    CHECK(text == slurp(dir / "b.csv"));
    const Dataset ds = read_dataset_csv((dir / "a.csv").string());
    CHECK(ds.n() == 8);
    CHECK(ds.d() == 20);
    const auto m = nlohmann::json::parse(slurp(dir / "a.manifest.json"));
    CHECK(m["subcommand"] == "gen-data");
    CHECK(m["master_seed"] == 5);
    CHECK(m["tool_version"] == cli::kToolVersion);
    CHECK(m["config"]["kind"] == "orthogonal");
}

TEST_CASE("landscape smoke run") {
    const fs::path d1 = scratch("land1"), d2 = scratch("land2");
    const std::vector<std::string> base = {"landscape", "--dataset", "gaussian-teacher:n=4,d=2", "--m-grid", "1,8",
                                           "--cones", "10", "--replicates", "1", "--seed", "3"};
    auto a = base;
    a.insert(a.end(), {"--threads", "1", "--out-dir", d1.string()});
    auto b = base;
    b.insert(b.end(), {"--threads", "2", "--out-dir", d2.string()});
    const Run ra = run_cli(a);
    REQUIRE(ra.code == 0);
    REQUIRE(run_cli(b).code == 0);
    CHECK(ra.out.find("cover_count(4,2) = 16") != std::string::npos);
    const std::string csv = slurp(d1 / "landscape.csv");
    CHECK(csv == slurp(d2 / "landscape.csv"));
    CHECK(csv.find("cover_count=16") != std::string::npos);
    CHECK(fs::exists(d1 / "manifest.json"));
    auto net = base;
    net.insert(net.end(), {"--strategy", "network", "--out-dir", scratch("land3").string()});
    CHECK(run_cli(net).code == 0);
}

TEST_CASE("train writes series and aggregates") {
    const fs::path dir = scratch("train");
    const Run r = run_cli({"train", "--dataset", "assumption1:d=3", "--alpha-grid", "2^-2..2^-4", "--width", "10",
                           "--max-epochs", "1e3", "--replicates", "2", "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    for (int ai = 0; ai < 3; ++ai)
        for (int rep = 0; rep < 2; ++rep)
            CHECK(fs::exists(dir / ("series_a" + std::to_string(ai) + "_r" + std::to_string(rep) + ".csv")));
    const std::string net = slurp(dir / "net_size.csv");
    CHECK(net.rfind("alpha,net_size_mean,net_size_min,net_size_max\n", 0) == 0);
    CHECK(slurp(dir / "reg_loss_distance.csv").rfind("alpha,reg_loss_distance_mean,", 0) == 0);
    CHECK(slurp(dir / "directions_a0.csv").rfind("epoch,num_pos_neurons_mean\n", 0) == 0);
    const std::string runs = slurp(dir / "runs.csv");
    CHECK(runs.find("0.25,0,1000,0,0,") != std::string::npos);  // truncated, not converged
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(m["config"]["alphas"].size() == 3);
}

TEST_CASE("theory command") {
    const Run ok = run_cli({"theory", "--dataset", "assumption1:d=4,noise_std=0", "--out-dir", scratch("th").string()});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("FAIL") == std::string::npos);
    CHECK(ok.out.find("cos_vstar_xdag2_exceeds_sin_xdag2_xdag3") != std::string::npos);

    const fs::path dir = scratch("tho");
    REQUIRE(run_cli({"gen-data", "--kind", "orthogonal", "--n", "4", "--d", "6", "--seed", "2", "--out",
                     (dir / "o.csv").string()})
                .code == 0);
    const Run skip = run_cli({"theory", "--dataset", (dir / "o.csv").string(), "--lambda", "100", "--out-dir", dir.string()});
    CHECK(skip.code == 0);
    CHECK(skip.out.find("SKIP nonzero_outputs_at_global_minimum") != std::string::npos);
    CHECK(slurp(dir / "theory.csv").find("skipped") != std::string::npos);
}

TEST_CASE("config files fill in flags the command line leaves out") {
    const fs::path dir = scratch("cfg");
    {
        std::ofstream f(dir / "gen.cfg");
        f << "# dataset\nkind = gaussian-teacher\nn=5\nd=3\nseed=9\n";
    }
    REQUIRE(run_cli({"gen-data", "--config", (dir / "gen.cfg").string(), "--out", (dir / "x.csv").string()}).code == 0);
    REQUIRE(run_cli({"gen-data", "--config", (dir / "gen.cfg").string(), "--n", "7", "--out", (dir / "y.csv").string()})
                .code == 0);
    CHECK(read_dataset_csv((dir / "x.csv").string()).n() == 5);
    CHECK(read_dataset_csv((dir / "y.csv").string()).n() == 7);
    CHECK(read_dataset_csv((dir / "x.csv").string()).seed == 9);
}

TEST_CASE("argument parsers") {
    const auto grid = cli::parse_alpha_grid("2^-1..2^-9");
    REQUIRE(grid.size() == 9);
    CHECK(grid.front() == 0.5);
    CHECK(grid.back() == std::exp2(-9));
    CHECK(cli::parse_alpha_grid("0.5, 2^-3") == std::vector<double>{0.5, 0.125});
    CHECK(cli::parse_count("1e5") == 100000);
    CHECK_THROWS_AS(cli::parse_count("1.5"), InvalidArgument);
    CHECK_THROWS_AS(cli::parse_count("-2"), InvalidArgument);
    CHECK(cli::parse_size_list("1,2,64") == std::vector<std::size_t>{1, 2, 64});
    const cli::DatasetSource s = cli::parse_dataset_source("orthogonal:n=8,d=20,teacher_width=4", 7);
    CHECK(s.kind == DatasetKind::Orthogonal);
    CHECK(s.n == 8);
    CHECK(s.seed == 7);
    CHECK(s.teacher_width == 4);
    CHECK(s.make(1).points == s.make(1).points);
    CHECK(s.make(0).points != s.make(1).points);
    CHECK(cli::parse_dataset_source("assumption1:d=5", 0).n == 5);
    CHECK_THROWS_AS(cli::parse_dataset_source("orthogonal:n=8,q=3,d=20", 0), InvalidArgument);
    CHECK_THROWS_AS(cli::parse_dataset_source("/no/such/file.csv", 0), InvalidArgument);
}
