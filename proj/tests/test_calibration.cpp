// SPDX-License-Identifier: Apache-2.0

#include "synthetic.hpp"

#include "risplan/calibration.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace risplan;
using namespace risplan::testing;

namespace {

std::vector<MeasurementSample> square_samples(double x0, double y0, int n, double value = -90.0)
{
    std::vector<MeasurementSample> out;
    for (int i = 0; i < n; ++i) {
        MeasurementSample s;
        s.x = x0 + 0.3 + 0.35 * (i % 25);
        s.y = y0 + 0.3 + 0.35 * (i / 25);
        s.rsrp_dbm = value + i;
        out.push_back(s);
    }
    return out;
}

Scene empty_scene() { return Scene({{"concrete", 5.31, 0.139, 0.0}}, {}, Box2{{0, 0}, {200, 200}}, std::nullopt); }

double mean_abs_error(const CalibrationResult& r, const std::vector<double>& sim)
{
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < r.regions.size(); ++i) {
        if (r.regions[i].excluded == ExclusionReason::None) {
            s += std::abs(sim[i] - r.regions[i].avg_measured_dbm);
            ++n;
        }
    }
    return s / n;
}

} // namespace

TEST_CASE("equirectangular projection and csv round trip")
{
    const GeoReference ref{51.5, -0.12};
    const Vec2 p = ref.project(51.501, -0.12);
    CHECK(p.x == doctest::Approx(0.0));
    CHECK(p.y == doctest::Approx(kEarthRadiusM * 0.001 * kPi / 180).epsilon(1e-9));
    const Vec2 q = ref.project(51.5, -0.119);
    CHECK(q.x == doctest::Approx(kEarthRadiusM * 0.001 * kPi / 180 * std::cos(51.5 * kPi / 180)).epsilon(1e-9));

    std::vector<MeasurementSample> s(2);
    s[0] = {12.5, -40.25, -93.5, 4.0, true};
    s[1] = {-7.0, 3.0, -110.0, std::nan(""), false};
    std::ostringstream out;
    write_measurements_csv(s, ref, out);
    std::istringstream in(out.str());
    const auto back = read_measurements_csv(in, ref);
    REQUIRE(back.size() == 2);
    CHECK(std::abs(back[0].x - 12.5) < 1e-3);
    CHECK(std::abs(back[0].y + 40.25) < 1e-3);
    CHECK(back[0].rsrp_dbm == -93.5);
    CHECK(back[0].sinr_db == 4.0);
    CHECK(back[0].outdoor);
    CHECK(std::isnan(back[1].sinr_db));
    CHECK_FALSE(back[1].outdoor);

    std::istringstream no_sinr("lat,lon,rsrp_dbm\n51.5,-0.12,-80\n");
    CHECK(read_measurements_csv(no_sinr, ref).size() == 1);
    std::istringstream bad("lat,lon,rsrp_dbm,sinr_db,indoor\n51.5,x,-80,,0\n");
    CHECK_THROWS_AS(read_measurements_csv(bad, ref), ParseError);
    std::istringstream missing("lat,rsrp_dbm\n1,2\n");
    CHECK_THROWS_AS(read_measurements_csv(missing, ref), ParseError);
    CHECK_THROWS_AS(load_measurements("/nonexistent/m.csv", ref), ParseError);
}

TEST_CASE("build_target_regions")
{
    const Scene scene = empty_scene();
    const CalibrationConfig cfg;
    CHECK(build_target_regions(square_samples(10, 10, 19), scene, cfg).empty());

    const auto s25 = square_samples(10, 10, 25);
    const auto one = build_target_regions(s25, scene, cfg);
    REQUIRE(one.size() == 1);
    double mean = 0.0;
    for (const auto& s : s25) {
        mean += s.rsrp_dbm;
    }
    CHECK(one[0].avg_measured_dbm == doctest::Approx(mean / 25));
    CHECK(one[0].bounds.width() == 10.0);
    CHECK(one[0].samples.size() == 25);

    auto two = square_samples(10, 10, 20);
    const auto next = square_samples(20, 10, 20);
    two.insert(two.end(), next.begin(), next.end());
    CHECK(build_target_regions(two, scene, cfg).size() == 2);

    // Indoor-flagged samples are dropped before counting.
    auto indoor = square_samples(10, 10, 25);
    indoor[0].outdoor = false;
    indoor[1].outdoor = false;
    indoor[2].outdoor = false;
    indoor[3].outdoor = false;
    indoor[4].outdoor = false;
    indoor[5].outdoor = false;
    CHECK(build_target_regions(indoor, scene, cfg).empty());

    // Groups within 100 m of the region centre.
    const Scene cross = crossing_scene({}, true);
    const auto near = build_target_regions(square_samples(100, 130, 25), cross, cfg);
    REQUIRE(near.size() == 1);
    CHECK(near[0].groups.size() == 4);
    CalibrationConfig tight = cfg;
    tight.group_radius = 30;
    const auto few = build_target_regions(square_samples(100, 130, 25), cross, tight);
    REQUIRE(few.size() == 1);
    REQUIRE(few[0].groups.size() == 2);
    const auto groups = GroupTable::of(cross);
    CHECK(groups.names[static_cast<std::size_t>(few[0].groups[0])] == "nw");
    CHECK(groups.names[static_cast<std::size_t>(few[0].groups[1])] == "ne");
}

TEST_CASE("region_loss")
{
    CHECK(region_loss(-90.0, -90.0) == 0.0);
    CHECK(region_loss(-95.0, -100.0) == 25.0);
    CHECK(region_loss(-100.0, -95.0) == 25.0);
}

TEST_CASE("region model matches the coverage engine")
{
    const Scene scene = crossing_scene({});
    const auto net = crossing_network();
    const auto sys = SystemConfig::preset("5G");
    TraceConfig tc = crossing_trace();
    tc.frequency = sys.frequency;
    CoverageEngine engine(scene, net, sys, tc);
    const std::vector<Vec3> pts{{105, 135, 1.5}, {115, 45, 1.5}, {110, 100, 1.5}, {60, 100, 1.5}};
    const RegionModel model(engine, pts);
    const auto groups = GroupTable::of(scene);
    const std::vector<std::optional<MaterialParams>> none(groups.size());
    const auto v = model.rsrp(material_table(scene, groups, none));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(v[i] == doctest::Approx(engine.best_server(pts[i]).rsrp_dbm).epsilon(1e-12));
    }

    // Overridden groups agree with a scene carrying the same materials.
    std::vector<std::optional<MaterialParams>> p(groups.size());
    p[0] = MaterialParams{9.0, 0.5, 0.3};
    const Scene alt = calibrated_scene(scene, groups, p);
    CoverageEngine alt_engine(alt, net, sys, tc);
    const auto w = model.rsrp(material_table(scene, groups, p));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(w[i] == doctest::Approx(alt_engine.best_server(pts[i]).rsrp_dbm).epsilon(1e-12));
    }
    CHECK(alt.materials().back().id == "cal_west");
}

TEST_CASE("finite differences and projected Adam")
{
    CalibrationConfig cfg;
    const std::vector<double> lo{1.0};
    const std::vector<double> hi{20.0};
    const std::vector<std::size_t> active{0};
    const double opt = 7.3;
    auto f = [&](const std::vector<double>& x) { return (x[0] - opt) * (x[0] - opt); };

    // Central differences are exact on a quadratic.
    const auto g = fd_gradient(f, {4.0}, active, lo, hi, 0.01);
    CHECK(g[0] == doctest::Approx(2 * (4.0 - opt)).epsilon(1e-9));
    // At the bound the probe is one-sided.
    const auto gb = fd_gradient(f, {1.0}, active, lo, hi, 0.01);
    CHECK(gb[0] == doctest::Approx(2 * (1.0 - opt) + 0.19).epsilon(1e-9));

    SUBCASE("no move at the minimum")
    {
        std::vector<double> x{opt};
        AdamState st;
        const std::vector<double> zero{0.0};
        adam_update(x, zero, active, st, cfg, lo, hi);
        CHECK(std::abs(x[0] - opt) < cfg.learning_rate * cfg.adam_epsilon);
    }
    SUBCASE("inward gradient at the bound moves inward")
    {
        std::vector<double> x{1.0};
        AdamState st;
        adam_update(x, fd_gradient(f, x, active, lo, hi, 0.01), active, st, cfg, lo, hi);
        CHECK(x[0] > 1.0);
        std::vector<double> y{1.0};
        AdamState fresh;
        const std::vector<double> outward{5.0};
        adam_update(y, outward, active, fresh, cfg, lo, hi);
        CHECK(y[0] == 1.0);
    }
    SUBCASE("quadratic converges in 600 steps")
    {
        std::vector<double> x{5.0};
        AdamState st;
        for (int i = 0; i < 600; ++i) {
            adam_update(x, fd_gradient(f, x, active, lo, hi, cfg.fd_step), active, st, cfg, lo, hi);
            CHECK(x[0] >= lo[0]);
            CHECK(x[0] <= hi[0]);
        }
        CHECK(x[0] == doctest::Approx(opt).epsilon(0.1 / opt));
    }
}

TEST_CASE("calibrate_scene without usable regions")
{
    const Scene scene = crossing_scene({});
    const auto sys = SystemConfig::preset("5G");
    const auto few = square_samples(100, 130, 10);
    const auto r = calibrate_scene(scene, crossing_network(), sys, few, crossing_trace(), CalibrationConfig{});
    CHECK(r.regions.empty());
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.scene.materials().size() == scene.materials().size());
    for (const auto& p : r.params) {
        CHECK_FALSE(p);
    }

    // Every region far off: all excluded by the gap rule, scene unchanged in effect.
    auto off = square_samples(100, 130, 25, 0.0);
    const auto e = calibrate_scene(scene, crossing_network(), sys, off, crossing_trace(), CalibrationConfig{});
    REQUIRE(e.regions.size() == 1);
    CHECK(e.regions[0].excluded == ExclusionReason::InitialGap);
    CHECK(e.cells.empty());
    CHECK(e.warnings.size() == 1);
}

TEST_CASE("synthetic ground-truth calibration")
{
    const Scene truth = crossing_scene({});
    const auto net = crossing_network();
    const auto sys = SystemConfig::preset("5G");
    TraceConfig tc = crossing_trace();
    tc.frequency = sys.frequency;
    CoverageEngine truth_engine(truth, net, sys, tc);
    truth_engine.index_height(1.5);
    const auto regions = crossing_regions();
    auto samples = synthetic_samples(truth_engine, regions, 2.0, 11);
    // Unmodelled geometry: one extra region reads 30 dB low.
    const std::vector<Box2> odd{{{100, 180}, {110, 190}}};
    for (auto s : synthetic_samples(truth_engine, odd, 2.0, 12)) {
        s.rsrp_dbm -= 30.0;
        samples.push_back(s);
    }

    CalibrationConfig cfg;
    cfg.iterations_per_cell = 300;
    cfg.seed = 5;
    const auto r = calibrate_scene(truth, net, sys, samples, tc, cfg);
    REQUIRE(r.regions.size() == regions.size() + 1);

    const auto odd_it = std::find_if(r.regions.begin(), r.regions.end(),
                                     [](const TargetRegion& t) { return t.bounds.min.y == 180.0; });
    REQUIRE(odd_it != r.regions.end());
    const auto odd_idx = static_cast<std::size_t>(odd_it - r.regions.begin());
    CHECK(std::abs(r.initial_region_dbm[odd_idx] - odd_it->avg_measured_dbm) > cfg.outlier_gap_db);
    CHECK(odd_it->excluded == ExclusionReason::InitialGap);

    const double before = mean_abs_error(r, r.initial_region_dbm);
    const double after = mean_abs_error(r, r.final_region_dbm);
    CHECK(before >= 5.0);
    CHECK(after <= 0.2 * before);

    // Bounds hold at every iteration for every calibrated group.
    REQUIRE(!r.trajectory.empty());
    for (const auto& x : r.trajectory) {
        for (std::size_t g = 0; g < r.groups.size(); ++g) {
            if (!r.params[g]) {
                continue;
            }
            for (int k = 0; k < 3; ++k) {
                CHECK(x[3 * g + static_cast<std::size_t>(k)] >= cfg.bounds.lower[k]);
                CHECK(x[3 * g + static_cast<std::size_t>(k)] <= cfg.bounds.upper[k]);
            }
        }
    }

    // Bit-reproducible under the same seed.
    const auto again = calibrate_scene(truth, net, sys, samples, tc, cfg);
    CHECK(again.trajectory == r.trajectory);
    CHECK(calibration_report(again).dump() == calibration_report(r).dump());
}

TEST_CASE("groups of a finished cell stay frozen")
{
    const Scene truth = crossing_scene({}, true);
    const auto net = crossing_network();
    const auto sys = SystemConfig::preset("5G");
    TraceConfig tc = crossing_trace();
    tc.frequency = sys.frequency;
    CoverageEngine truth_engine(truth, net, sys, tc);
    truth_engine.index_height(1.5);
    const auto samples = synthetic_samples(truth_engine, crossing_regions(), 2.0, 11);

    CalibrationConfig cfg;
    cfg.iterations_per_cell = 60;
    cfg.group_radius = 30.0; // each half of the street sees only its own two blocks
    const auto r = calibrate_scene(truth, net, sys, samples, tc, cfg);

    REQUIRE(r.cells.size() == 2);
    REQUIRE(!r.cells[0].groups.empty());
    REQUIRE(!r.cells[1].groups.empty());
    for (int g : r.cells[0].groups) {
        CHECK(std::find(r.cells[1].groups.begin(), r.cells[1].groups.end(), g) == r.cells[1].groups.end());
    }
    const auto split = static_cast<std::size_t>(cfg.iterations_per_cell);
    REQUIRE(r.trajectory.size() == 2 * split);
    for (int g : r.cells[0].groups) {
        CHECK(r.frozen[static_cast<std::size_t>(g)]);
        for (std::size_t k = 0; k < 3; ++k) {
            const std::size_t i = 3 * static_cast<std::size_t>(g) + k;
            const double frozen = r.trajectory[split - 1][i];
            for (std::size_t t = split; t < r.trajectory.size(); ++t) {
                CHECK(r.trajectory[t][i] == frozen);
            }
        }
    }
}

TEST_CASE("error statistics and validation")
{
    const std::vector<double> zero(10, 0.0);
    const auto z = error_stats(zero);
    CHECK(z.mean == 0.0);
    CHECK(z.median == 0.0);
    CHECK(z.std == 0.0);
    const std::vector<double> bias(7, 3.0);
    const auto b = error_stats(bias);
    CHECK(b.mean == doctest::Approx(3.0));
    CHECK(b.median == 3.0);
    CHECK(b.std == doctest::Approx(0.0));

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 2.5);
    std::vector<double> noisy(4000);
    for (auto& v : noisy) {
        v = n(rng);
    }
    CHECK(error_stats(noisy).std == doctest::Approx(2.5).epsilon(0.15));

    // Perfect agreement and constant bias through the full validation path.
    const Scene scene = crossing_scene({});
    const auto sys = SystemConfig::preset("5G");
    TraceConfig tc = crossing_trace();
    tc.frequency = sys.frequency;
    CoverageEngine engine(scene, crossing_network(), sys, tc);
    const auto boxes = crossing_regions();
    auto samples = synthetic_samples(engine, boxes, 0.0, 1);
    CalibrationConfig cfg;
    const auto regions = build_target_regions(samples, scene, cfg);
    const auto perfect = validation_metrics(engine, samples, regions, cfg);
    CHECK(perfect.stats.count == samples.size());
    CHECK(perfect.stats.mean == doctest::Approx(0.0));
    CHECK(perfect.stats.median == doctest::Approx(0.0));
    CHECK(perfect.stats.std == doctest::Approx(0.0));
    for (auto& s : samples) {
        s.rsrp_dbm -= 3.0;
    }
    auto biased_regions = build_target_regions(samples, scene, cfg);
    biased_regions[0].excluded = ExclusionReason::InitialGap;
    const auto biased = validation_metrics(engine, samples, biased_regions, cfg);
    CHECK(biased.stats.count == samples.size() - 25);
    CHECK(biased.stats.mean == doctest::Approx(3.0));
    CHECK(biased.stats.median == doctest::Approx(3.0));
    CHECK(biased.stats.std == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(biased.region_stats.mean == doctest::Approx(3.0));
    CHECK(biased.regions.size() == biased_regions.size());
    CHECK(biased.simulated_cdf.back().cdf == doctest::Approx(1.0));

    std::ostringstream scatter;
    write_region_scatter_csv(biased, scatter);
    CHECK(scatter.str().rfind("region,simulated_dbm,measured_dbm,excluded\n0,", 0) == 0);
    std::ostringstream hist;
    write_error_histogram_csv(biased, hist);
    CHECK(hist.str() == "bin_low_db,bin_high_db,count\n3.000,4.000," + std::to_string(samples.size() - 25) + "\n");
    std::ostringstream cdf;
    write_validation_cdf_csv(biased, cdf);
    CHECK(cdf.str().rfind("series,rsrp_dbm,cdf\nsimulated,", 0) == 0);
    CHECK(biased.to_json()["sample_errors"]["count"] == samples.size() - 25);
}
