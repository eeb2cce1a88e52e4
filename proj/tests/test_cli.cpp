// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

int runCommand(const std::string& cmd) {
    int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliFixture {
    fs::path dir;
    std::string cli = EDGEFLOW_CLI_PATH;

    CliFixture() {
        dir = fs::temp_directory_path() / ("edgeflow_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        REQUIRE(runCommand(std::string(EDGEFLOW_FIXTURES_PATH) + " --out " +
                           (dir / "fixtures").string()) == 0);
    }
    ~CliFixture() { fs::remove_all(dir); }

    std::string graph(const std::string& name) const {
        return (dir / "fixtures" / (name + ".json")).string();
    }
    std::string hw() const { return (dir / "fixtures" / "hw_tms_like.json").string(); }
    std::string cluster() const { return (dir / "fixtures" / "cluster_n4_ring.json").string(); }
};

} // namespace

TEST_CASE("optimize writes plan, optimized graph and pass report") {
    CliFixture f;
    fs::path out = f.dir / "opt";
    REQUIRE(runCommand(f.cli + " optimize --graph " + f.graph("shufflenet_unit") + " --hw " +
                       f.hw() + " --seed 3 --out " + out.string()) == 0);
    CHECK(fs::exists(out / "plan.json"));
    CHECK(fs::exists(out / "optimized_graph.json"));
    CHECK(fs::exists(out / "pass_report.json"));
    CHECK(fs::exists(out / "run_meta.json"));
}

TEST_CASE("ablation flags produce the HO and vanilla arms") {
    CliFixture f;
    fs::path ho = f.dir / "ho", van = f.dir / "van";
    REQUIRE(runCommand(f.cli + " optimize --graph " + f.graph("squeezenet_fire") + " --hw " +
                       f.hw() + " --no-fuse --no-link --no-layout --out " + ho.string()) == 0);
    REQUIRE(runCommand(f.cli + " optimize --graph " + f.graph("squeezenet_fire") + " --hw " +
                       f.hw() + " --no-fuse --no-link --no-split --no-partition --no-layout" +
                       " --out " + van.string()) == 0);
    std::string hoPlan = slurp(ho / "plan.json");
    CHECK(hoPlan.find("\"fuse\": false") != std::string::npos);
    CHECK(hoPlan.find("\"split\": true") != std::string::npos);
    // vanilla keeps reference placements (no pooled reuse)
    CHECK(slurp(van / "plan.json").find("\"pooled_allocation\": false") != std::string::npos);
}

TEST_CASE("run executes a plan and emits profile artifacts") {
    CliFixture f;
    fs::path opt = f.dir / "opt2", run = f.dir / "run2";
    REQUIRE(runCommand(f.cli + " optimize --graph " + f.graph("shufflenet_unit") + " --hw " +
                       f.hw() + " --out " + opt.string()) == 0);
    REQUIRE(runCommand(f.cli + " run --plan " + (opt / "plan.json").string() +
                       " --seed 4 --repeat 2 --out " + run.string()) == 0);
    CHECK(fs::exists(run / "profile.json"));
    CHECK(fs::exists(run / "profile.csv"));
    CHECK(fs::exists(run / "outputs.json"));
    CHECK(slurp(run / "profile.csv").rfind("layer,unit,cycles,hits,misses", 0) == 0);
}

TEST_CASE("compare: a plan against itself reports speedup 1.0") {
    CliFixture f;
    fs::path opt = f.dir / "opt3", cmp = f.dir / "cmp3";
    REQUIRE(runCommand(f.cli + " optimize --graph " + f.graph("shufflenet_unit") + " --hw " +
                       f.hw() + " --out " + opt.string()) == 0);
    std::string plan = (opt / "plan.json").string();
    REQUIRE(runCommand(f.cli + " compare --plan-a " + plan + " --plan-b " + plan + " --out " +
                       cmp.string()) == 0);
    CHECK(slurp(cmp / "compare.json").find("\"speedup\": 1.0") != std::string::npos);
}

TEST_CASE("compare: plans from different graphs exit with the usage code") {
    CliFixture f;
    fs::path a = f.dir / "a", b = f.dir / "b";
    REQUIRE(runCommand(f.cli + " optimize --graph " + f.graph("shufflenet_unit") + " --hw " +
                       f.hw() + " --out " + a.string()) == 0);
    REQUIRE(runCommand(f.cli + " optimize --graph " + f.graph("squeezenet_fire") + " --hw " +
                       f.hw() + " --out " + b.string()) == 0);
    CHECK(runCommand(f.cli + " compare --plan-a " + (a / "plan.json").string() + " --plan-b " +
                     (b / "plan.json").string() + " --out " + (f.dir / "cmpx").string()) == 2);
}

TEST_CASE("distplan emits the cost table and selected scheme") {
    CliFixture f;
    fs::path out = f.dir / "dp";
    REQUIRE(runCommand(f.cli + " distplan --graph " + f.graph("mobilenet_block") + " --cluster " +
                       f.cluster() + " --out " + out.string()) == 0);
    CHECK(fs::exists(out / "distplan.json"));
    std::string csv = slurp(out / "distplan.csv");
    CHECK(csv.rfind("node,chosen_dim", 0) == 0);
    // ring and ps columns both present
    CHECK(slurp(out / "distplan.json").find("sync_ps_cycles") != std::string::npos);
}

TEST_CASE("report renders a profile") {
    CliFixture f;
    fs::path opt = f.dir / "opt4", run = f.dir / "run4";
    REQUIRE(runCommand(f.cli + " optimize --graph " + f.graph("lstm_chain") + " --hw " + f.hw() +
                       " --out " + opt.string()) == 0);
    REQUIRE(runCommand(f.cli + " run --plan " + (opt / "plan.json").string() + " --out " +
                       run.string()) == 0);
    CHECK(runCommand(f.cli + " report --profile " + (run / "profile.json").string()) == 0);
}

TEST_CASE("bad inputs exit with the validation code") {
    CliFixture f;
    CHECK(runCommand(f.cli + " optimize --graph /nonexistent.json --hw " + f.hw() + " --out " +
                     (f.dir / "x").string()) == 3);
    CHECK(runCommand(f.cli + " frobnicate") == 2);
}

TEST_CASE("distplan honors the forced ps sync flag") {
    CliFixture f;
    fs::path ring = f.dir / "dp_ring", ps = f.dir / "dp_ps";
    REQUIRE(runCommand(f.cli + " distplan --graph " + f.graph("lstm_chain") + " --cluster " +
                       f.cluster() + " --sync ring --out " + ring.string()) == 0);
    REQUIRE(runCommand(f.cli + " distplan --graph " + f.graph("lstm_chain") + " --cluster " +
                       f.cluster() + " --sync ps --out " + ps.string()) == 0);
    CHECK(slurp(ps / "distplan.json").find("\"sync\": \"ps\"") != std::string::npos);
    // ps totals never beat ring totals
    auto total = [&](const fs::path& p) {
        std::string s = slurp(p / "distplan.json");
        auto pos = s.find("\"total_cycles\":");
        REQUIRE(pos != std::string::npos);
        return std::stod(s.substr(pos + 15));
    };
    CHECK(total(ps) >= total(ring));
}
