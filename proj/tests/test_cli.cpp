// SPDX-License-Identifier: Apache-2.0

#include "synthetic.hpp"

#include "risplan/cli.hpp"

#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace risplan;
using namespace risplan::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kData = RISPLAN_DATA_DIR;

fs::path fresh_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("risplan_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "risplan");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = run_command(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

const std::string kCanyon = (kData / "canyon.ini").string();

} // namespace

TEST_CASE("config defaults carry the planning constants")
{
    std::istringstream empty("");
    const auto c = RunConfig::parse(empty);
    CHECK(c.system == "5G");
    CHECK(c.pipeline.threshold_dbm == -100.0);
    CHECK(c.pipeline.t1 == 15.0);
    CHECK(c.pipeline.t2 == 10.0);
    CHECK(c.pipeline.effective_fraction == 0.4);
    CHECK(c.pipeline.ris_width == 11.24);
    CHECK(c.pipeline.ris_height == 11.24);
    CHECK(c.pipeline.nearby_range_m == 60.0);
    CHECK(c.calibration.iterations_per_cell == 600);
    CHECK(c.calibration.learning_rate == 0.05);
    CHECK(c.trace.max_bounces == 4);
    CHECK(c.tile_size == 2.0);
}

TEST_CASE("config parsing")
{
    std::istringstream in("scene = s.json\n"
                          "network = /abs/n.json\n"
                          "system = 6G\n"
                          "; comment\n"
                          "[trace]\nray_count = 5000\nmax_bounces = 2\ncapture_scale = 2.5\n"
                          "[coverage]\ndiffuse = all\n"
                          "[pipeline]\nstrategy = scattering\nrecluster = false\naperture_sizes = 1, 2.5, 8\n"
                          "[calibration]\nmeasurements = m.csv\norigin_lat = 51.5\norigin_lon = -0.1\nseed = 9\n");
    const auto c = RunConfig::parse(in, "/base");
    CHECK(c.scene_path == fs::path("/base/s.json"));
    CHECK(c.network_path == fs::path("/abs/n.json"));
    CHECK(c.measurements_path == fs::path("/base/m.csv"));
    CHECK(c.system == "6G");
    CHECK(c.trace.ray_count == 5000);
    CHECK(c.trace.max_bounces == 2);
    CHECK(c.trace.capture_scale == 2.5);
    CHECK(c.diffuse == DiffuseMode::AllFaces);
    CHECK(c.pipeline.strategy == Strategy::Scattering);
    CHECK_FALSE(c.pipeline.recluster);
    CHECK(c.aperture_sizes == std::vector<double>{1.0, 2.5, 8.0});
    CHECK(c.geo.lat0_deg == 51.5);
    CHECK(c.geo.lon0_deg == -0.1);
    CHECK(c.calibration.seed == 9);

    std::istringstream unknown("[trace]\nrays = 5\n");
    CHECK_THROWS_AS(RunConfig::parse(unknown), ParseError);
    std::istringstream bad_number("[pipeline]\neta = high\n");
    CHECK_THROWS_AS(RunConfig::parse(bad_number), ParseError);
    std::istringstream bad_enum("[coverage]\ndiffuse = sometimes\n");
    CHECK_THROWS_AS(RunConfig::parse(bad_enum), ParseError);
}

TEST_CASE("exit codes and diagnostics")
{
    const auto dir = fresh_dir("codes");
    auto r = run({"frobnicate"});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("frobnicate") != std::string::npos);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

    CHECK(run({"coverage"}).code == kExitUsage); // --config is required
    CHECK(run({"coverage", "-c", kCanyon, "--bogus"}).code == kExitUsage);

    r = run({"coverage", "-c", kCanyon, "--scene", "/nonexistent/scene.json", "-o", (dir / "a").string()});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("/nonexistent/scene.json") != std::string::npos);
    CHECK(run({"coverage", "-c", "/nonexistent/run.ini"}).code == kExitConfig);
    CHECK(run({"calibrate", "-c", kCanyon, "-o", (dir / "b").string()}).code == kExitConfig);

    {
        std::ofstream ini(dir / "range.ini");
        ini << "scene = " << (kData / "canyon.json").string() << "\nnetwork = "
            << (kData / "canyon_network.json").string() << "\n[pipeline]\neffective_fraction = 1.5\n";
    }
    r = run({"coverage", "-c", (dir / "range.ini").string(), "-o", (dir / "c").string()});
    CHECK(r.code == kExitInvariant);
    CHECK(run({"coverage", "-c", kCanyon, "--system", "7G", "-o", (dir / "c").string()}).code == kExitInvariant);

    // Output below a regular file cannot be created.
    { std::ofstream blocker(dir / "file"); }
    CHECK(run({"coverage", "-c", kCanyon, "-o", (dir / "file" / "out").string()}).code == kExitIo);
}

TEST_CASE("coverage and cluster artifacts with a complete manifest")
{
    const auto dir = fresh_dir("coverage");
    for (const char* cmd : {"coverage", "cluster"}) {
        const auto out = dir / cmd;
        const auto r = run({cmd, "-c", kCanyon, "-o", out.string()});
        REQUIRE(r.code == kExitOk);
        const auto man = nlohmann::json::parse(slurp(out / "manifest.json"));
        CHECK(man["command"] == cmd);
        CHECK(man["config"]["trace"]["ray_count"] == 20000);
        std::set<std::string> listed;
        for (const auto& f : man["files"]) {
            listed.insert(f["path"].get<std::string>());
            CHECK(f["bytes"].get<std::uintmax_t>() == fs::file_size(out / f["path"].get<std::string>()));
        }
        std::set<std::string> on_disk;
        for (const auto& e : fs::directory_iterator(out)) {
            if (e.path().filename() != "manifest.json") {
                on_disk.insert(e.path().filename().string());
            }
        }
        CHECK(listed == on_disk);
    }
    CHECK(slurp(dir / "coverage" / "coverage.csv").rfind("row,col,", 0) == 0);
    const auto summary = nlohmann::json::parse(slurp(dir / "coverage" / "coverage_summary.json"));
    CHECK(summary["outage_tiles"].get<int>() > 0);
    CHECK(fs::exists(dir / "cluster" / "clusters.csv"));
    CHECK(fs::exists(dir / "cluster" / "cluster_membership.csv"));
}

TEST_CASE("placement runs are byte-identical")
{
    const auto dir = fresh_dir("determinism");
    for (const char* cmd : {"place", "sweep-density"}) {
        REQUIRE(run({cmd, "-c", kCanyon, "-o", (dir / (std::string(cmd) + "1")).string()}).code == kExitOk);
        REQUIRE(run({cmd, "-c", kCanyon, "-o", (dir / (std::string(cmd) + "2")).string()}).code == kExitOk);
        const auto man = nlohmann::json::parse(slurp(dir / (std::string(cmd) + "1") / "manifest.json"));
        REQUIRE(!man["files"].empty());
        for (const auto& f : man["files"]) {
            const auto name = f["path"].get<std::string>();
            CHECK_MESSAGE(slurp(dir / (std::string(cmd) + "1") / name) == slurp(dir / (std::string(cmd) + "2") / name),
                          name);
        }
    }
    const auto report = nlohmann::json::parse(slurp(dir / "place1" / "pipeline_report.json"));
    CHECK(report["stages"]["placement"] <= report["stages"]["recluster"]);
    CHECK(report["stages"]["recluster"] <= report["stages"]["reassociation"]);
    const auto density = slurp(dir / "sweep-density1" / "density_sweep.csv");
    CHECK(density.rfind("n,ris_count,recovered_fraction,extended_fraction\n0,0,", 0) == 0);
}

TEST_CASE("empty deployment list and aperture sweep")
{
    const auto dir = fresh_dir("sweep");
    {
        std::ofstream ini(dir / "low.ini");
        ini << slurp(kCanyon) << "threshold_dbm = -400\n"; // appended to [pipeline]
    }
    fs::copy_file(kData / "canyon.json", dir / "canyon.json");
    fs::copy_file(kData / "canyon_network.json", dir / "canyon_network.json");
    REQUIRE(run({"place", "-c", (dir / "low.ini").string(), "-o", (dir / "none").string()}).code == kExitOk);
    CHECK(slurp(dir / "none" / "deployments.json") == "[]\n");

    REQUIRE(run({"sweep-aperture", "-c", kCanyon, "--sizes", "2,4,8", "-o", (dir / "ap").string()}).code == kExitOk);
    std::istringstream csv(slurp(dir / "ap" / "aperture_sweep.csv"));
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(csv, line)) {
        rows.push_back(line);
    }
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "aperture_m,recovered_fraction");
    CHECK(rows[1].rfind("2.000,", 0) == 0);
    CHECK(rows[2].rfind("4.000,", 0) == 0);
    CHECK(rows[3].rfind("8.000,", 0) == 0);
}

TEST_CASE("calibrate and validate from a measurement file")
{
    const auto dir = fresh_dir("calibrate");
    const Scene truth = crossing_scene({});
    // The model scene starts from the calibration's initial materials.
    save_scene(crossing_scene({MaterialParams{}, MaterialParams{}}), dir / "scene.json");
    {
        std::ofstream net(dir / "network.json");
        net << crossing_network().to_json().dump();
    }
    const auto sys = SystemConfig::preset("5G");
    TraceConfig tc = crossing_trace();
    tc.frequency = sys.frequency;
    CoverageOptions opts;
    CoverageEngine engine(truth, crossing_network(), sys, tc, opts);
    const auto samples = synthetic_samples(engine, crossing_regions(), 1.0, 3);
    const GeoReference geo{51.5, -0.12};
    {
        std::ofstream m(dir / "m.csv");
        write_measurements_csv(samples, geo, m);
        std::ofstream ini(dir / "run.ini");
        ini << "scene = scene.json\nnetwork = network.json\n[trace]\nray_count = 20000\nmax_bounces = 2\n"
               "[calibration]\nmeasurements = m.csv\norigin_lat = 51.5\norigin_lon = -0.12\niterations = 150\n";
    }
    auto r = run({"calibrate", "-c", (dir / "run.ini").string(), "-o", (dir / "cal").string()});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    for (const char* f : {"calibration_report.json", "calibrated_scene.json", "validation.json", "region_scatter.csv",
                          "error_histogram.csv", "validation_cdf.csv", "region_scatter_initial.csv"}) {
        CHECK_MESSAGE(fs::exists(dir / "cal" / f), f);
    }
    const auto v = nlohmann::json::parse(slurp(dir / "cal" / "validation.json"));
    CHECK(v["calibrated"]["regions"].size() == crossing_regions().size());
    const double before = std::abs(v["initial"]["sample_errors"]["mean_db"].get<double>());
    const double after = std::abs(v["calibrated"]["sample_errors"]["mean_db"].get<double>());
    CHECK(after < before);

    r = run({"validate", "-c", (dir / "run.ini").string(), "--scene", (dir / "cal" / "calibrated_scene.json").string(),
             "-o", (dir / "val").string()});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    const auto val = nlohmann::json::parse(slurp(dir / "val" / "validation.json"));
    CHECK(val["sample_errors"]["mean_db"].get<double>() ==
          doctest::Approx(v["calibrated"]["sample_errors"]["mean_db"].get<double>()).epsilon(1e-9));
}
