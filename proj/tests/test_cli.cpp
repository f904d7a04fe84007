#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string cli = STSFA_CLI_PATH;
const std::string data_dir = STSFA_TEST_DATA_DIR;

int run(const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("stsfa_cli_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("cli: simulate is reproducible and shaped correctly") {
    const fs::path out1 = fresh_dir("sim1"), out2 = fresh_dir("sim2");
    const std::string flags = "simulate --n 40 --t 5 --rho 0 --eta 0 --seed 11 --out ";
    REQUIRE(run(flags + out1.string()) == 0);
    REQUIRE(run(flags + out2.string()) == 0);
    CHECK(slurp(out1 / "panel.csv") == slurp(out2 / "panel.csv"));
    CHECK(slurp(out1 / "weights.csv") == slurp(out2 / "weights.csv"));
    CHECK(slurp(out1 / "truth.json") == slurp(out2 / "truth.json"));
    CHECK(fs::exists(out1 / "manifest.json"));

    // 40 units x 5 periods -> 200 data rows + header
    std::istringstream rows(slurp(out1 / "panel.csv"));
    int lines = 0;
    std::string line;
    while (std::getline(rows, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 201);

    // rho=0, eta=0 leaves every unit's output constant over periods
    // (regressor and noise are per-unit draws under the default noise rule)
    std::istringstream rows2(slurp(out1 / "panel.csv"));
    std::getline(rows2, line); // header: unit,time,y,const,x
    std::string first_unit, first_y;
    int seen = 0;
    while (std::getline(rows2, line)) {
        std::istringstream f(line);
        std::string unit, time, y;
        std::getline(f, unit, ',');
        std::getline(f, time, ',');
        std::getline(f, y, ',');
        if (seen == 0) {
            first_unit = unit;
            first_y = y;
        } else if (unit == first_unit) {
            CHECK(y == first_y);
        }
        if (++seen == 5) break;
    }
}

TEST_CASE("cli: simulate rejects bad configs") {
    CHECK(run("simulate --n 40 --t 5 --rho 2.0 --eta 0 --seed 1 --out " +
              fresh_dir("simbad").string()) == 1);
}

TEST_CASE("cli: weights from coordinates and groups") {
    const fs::path dir = fresh_dir("w");
    fs::create_directories(dir);
    {
        std::ofstream coords(dir / "coords.csv");
        coords << "unit,x,y\na,0,0\nb,1,0\nc,1,1\nd,0,1\n";
    }
    const fs::path wout = fresh_dir("wout");
    REQUIRE(run("weights --coords " + (dir / "coords.csv").string() + " --knn 2 --out " +
                wout.string()) == 0);
    const std::string trip = slurp(wout / "weights.csv");
    // square corners: each unit links to its two edge-adjacent corners
    CHECK(trip.find("0,1,1") != std::string::npos);
    CHECK(trip.find("0,3,1") != std::string::npos);
    CHECK(trip.find("0,2,") == std::string::npos); // no diagonal link
    const std::string summary = slurp(wout / "summary.txt");
    CHECK(summary.find("n 4") != std::string::npos);
    CHECK(summary.find("nnz 8") != std::string::npos);

    SECTION("knn 0 exits 1") {
        CHECK(run("weights --coords " + (dir / "coords.csv").string() + " --knn 0 --out " +
                  fresh_dir("wbad").string()) == 1);
    }
    SECTION("one group gives the complete block") {
        std::ofstream groups(dir / "groups.csv");
        groups << "unit,group\na,v\nb,v\nc,v\n";
        groups.close();
        const fs::path gout = fresh_dir("gout");
        REQUIRE(run("weights --groups " + (dir / "groups.csv").string() + " --standardize --out " +
                    gout.string()) == 0);
        const std::string g = slurp(gout / "weights.csv");
        CHECK(g.find("0,1,0.5") != std::string::npos);
        CHECK(g.find("2,0,0.5") != std::string::npos);
    }
}

TEST_CASE("cli: estimate validations and determinism") {
    const fs::path sim = fresh_dir("est_sim");
    REQUIRE(run("simulate --n 30 --t 4 --rho 0.3 --eta 0.05 --seed 21 --v-spec iid --u-form "
                "delta --x-varying --out " +
                sim.string()) == 0);

    SECTION("non-spatial model rejects weights") {
        CHECK(run("estimate --data " + (sim / "panel.csv").string() +
                  " --unit unit --time time --y y --x x --model tsfa-ti --weights " +
                  (sim / "weights.csv").string() + " --out " + fresh_dir("estbad").string()) == 1);
    }
    SECTION("spatial model requires weights") {
        CHECK(run("estimate --data " + (sim / "panel.csv").string() +
                  " --unit unit --time time --y y --x x --model stsfa-ti --out " +
                  fresh_dir("estbad2").string()) == 1);
    }
    SECTION("unknown column exits 1") {
        CHECK(run("estimate --data " + (sim / "panel.csv").string() +
                  " --unit unit --time time --y y --x nope --model tsfa-ti --out " +
                  fresh_dir("estbad3").string()) == 1);
    }
    SECTION("fit outputs are byte-stable and replay reproduces them") {
        const fs::path o1 = fresh_dir("est1"), o2 = fresh_dir("est2"), o3 = fresh_dir("est3");
        const std::string flags = "estimate --data " + (sim / "panel.csv").string() +
                                  " --unit unit --time time --y y --x x --model stsfa-tv"
                                  " --weights " + (sim / "weights.csv").string() +
                                  " --wformat triplet --out ";
        REQUIRE(run(flags + o1.string()) == 0);
        REQUIRE(run(flags + o2.string()) == 0);
        for (const char* f : {"fit.json", "efficiency.csv", "table.txt"})
            CHECK(slurp(o1 / f) == slurp(o2 / f));

        REQUIRE(run("replay " + (o1 / "manifest.json").string() + " --out " + o3.string()) == 0);
        for (const char* f : {"fit.json", "efficiency.csv", "table.txt"})
            CHECK(slurp(o1 / f) == slurp(o3 / f));
    }
}

TEST_CASE("cli: estimate matches committed golden outputs on a tiny fixture") {
    const fs::path out = fresh_dir("golden");
    const std::string flags = "estimate --data " + (fs::path(data_dir) / "tiny_panel.csv").string() +
                              " --unit farm --time year --y output --x input --model tsfa-ti"
                              " --out " + out.string();
    REQUIRE(run(flags) == 0);
    const fs::path golden = fs::path(data_dir) / "golden_estimate";
    for (const char* f : {"fit.json", "efficiency.csv", "table.txt"})
        CHECK(slurp(out / f) == slurp(golden / f));
}

TEST_CASE("cli: mc reports are seed-deterministic and thread-invariant") {
    const fs::path o1 = fresh_dir("mc1"), o2 = fresh_dir("mc2"), o4 = fresh_dir("mc4");
    const std::string base = "mc --n 20 --rho 0.2,0.4 --eta 0 --reps 3 --t 4 --seed 5"
                             " --v-spec iid --u-form delta --x-varying --dump-estimates";
    REQUIRE(run(base + " --threads 1 --out " + o1.string()) == 0);
    REQUIRE(run(base + " --threads 1 --out " + o2.string()) == 0);
    REQUIRE(run(base + " --threads 4 --out " + o4.string()) == 0);
    CHECK(slurp(o1 / "report.csv") == slurp(o2 / "report.csv"));
    CHECK(slurp(o1 / "report.csv") == slurp(o4 / "report.csv"));
    CHECK(slurp(o1 / "estimates.csv") == slurp(o4 / "estimates.csv"));
    CHECK(fs::exists(o1 / "table_n20.txt"));

    SECTION("invalid grid exits 1") {
        CHECK(run("mc --n 20 --rho 0.2 --eta 0 --reps 1 --seed 5 --out " +
                  fresh_dir("mcbad").string()) == 1);
    }
}
