// SPDX-License-Identifier: Apache-2.0

#include "risplan/cli.hpp"

#include "risplan/parallel.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace risplan {

namespace {

constexpr const char* kVersion = "0.1.0";

class IoError : public Error {
public:
    using Error::Error;
};

double parse_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("config key '" + key + "': not a number: '" + v + "'");
    }
    return out;
}

long long parse_integer(const std::string& key, const std::string& v)
{
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("config key '" + key + "': not an integer: '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw ParseError("config key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) {
            continue;
        }
        out.push_back(parse_double(key, item.substr(b, e - b + 1)));
    }
    if (out.empty()) {
        throw ParseError("config key '" + key + "': empty list");
    }
    return out;
}

DiffuseMode parse_diffuse(const std::string& v)
{
    if (v == "off") {
        return DiffuseMode::Off;
    }
    if (v == "scattering") {
        return DiffuseMode::ScatteringFaces;
    }
    if (v == "all") {
        return DiffuseMode::AllFaces;
    }
    throw ParseError("config key 'coverage.diffuse': expected off, scattering or all, got '" + v + "'");
}

const char* diffuse_name(DiffuseMode m)
{
    switch (m) {
    case DiffuseMode::Off:
        return "off";
    case DiffuseMode::ScatteringFaces:
        return "scattering";
    case DiffuseMode::AllFaces:
        return "all";
    }
    return "?";
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v)
{
    const std::filesystem::path p(v);
    return p.is_absolute() || base.empty() ? p : base / p;
}

void require_file(const std::filesystem::path& p, const char* what)
{
    if (p.empty()) {
        throw ParseError(std::string(what) + " path is not set");
    }
    if (!std::filesystem::is_regular_file(p)) {
        throw ParseError(std::string(what) + " file not found: " + p.string());
    }
}

// Writes artifacts into the output directory and remembers them for the manifest.
class Emitter {
public:
    explicit Emitter(std::filesystem::path dir) : dir_(std::move(dir))
    {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_)) {
            throw IoError("cannot create output directory " + dir_.string());
        }
    }

    void text(const std::string& name, const std::function<void(std::ostream&)>& fn)
    {
        std::ostringstream buf;
        fn(buf);
        const auto path = dir_ / name;
        std::ofstream out(path, std::ios::binary);
        out << buf.str();
        out.close();
        if (!out) {
            throw IoError("cannot write " + path.string());
        }
        record(name);
    }

    void json(const std::string& name, const nlohmann::json& j)
    {
        text(name, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    }

    void scene(const std::string& name, const Scene& s)
    {
        try {
            save_scene(s, dir_ / name);
        } catch (const Error& e) {
            throw IoError(e.what());
        }
        record(name);
    }

    const std::filesystem::path& dir() const { return dir_; }
    const std::vector<std::pair<std::string, std::uintmax_t>>& files() const { return files_; }

private:
    void record(const std::string& name)
    {
        std::error_code ec;
        const auto bytes = std::filesystem::file_size(dir_ / name, ec);
        if (ec) {
            throw IoError("cannot stat " + (dir_ / name).string());
        }
        files_.emplace_back(name, bytes);
    }

    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::uintmax_t>> files_;
};

// Scene, network and baseline coverage shared by the subcommands.
struct Workspace {
    explicit Workspace(const RunConfig& cfg)
        : scene(load_scene(cfg.scene_path)), network(load_network(cfg.network_path)),
          system(SystemConfig::preset(cfg.system)), trace(cfg.trace)
    {
        network.validate(scene);
        trace.frequency = system.frequency;
        options.samples_per_tile = cfg.samples_per_tile;
        options.diffuse = cfg.diffuse;
        options.scatter_patch_m = cfg.scatter_patch_m;
        options.threshold_dbm = cfg.pipeline.threshold_dbm;
        grid = TileGrid::covering(scene.bounds(), cfg.tile_size, cfg.ue_height);
    }

    const CoverageEngine& engine()
    {
        if (!engine_) {
            engine_ = std::make_unique<CoverageEngine>(scene, network, system, trace, options);
        }
        return *engine_;
    }

    const CoverageMap& baseline()
    {
        if (!baseline_) {
            baseline_ = std::make_unique<CoverageMap>(engine().coverage_map(grid));
        }
        return *baseline_;
    }

    Scene scene;
    Network network;
    SystemConfig system;
    TraceConfig trace;
    CoverageOptions options;
    TileGrid grid;

private:
    std::unique_ptr<CoverageEngine> engine_;
    std::unique_ptr<CoverageMap> baseline_;
};

nlohmann::json coverage_summary(const CoverageMap& map, const RsrpCdf& cdf)
{
    const auto outage = outage_set(map, map.threshold_dbm);
    const auto outdoor = map.outdoor_count();
    return {{"system", map.system.name},
            {"tiles", map.records.size()},
            {"outdoor_tiles", outdoor},
            {"outage_tiles", outage.size()},
            {"outage_fraction", outdoor ? static_cast<double>(outage.size()) / static_cast<double>(outdoor) : 0.0},
            {"no_signal_fraction", cdf.no_signal_fraction},
            {"threshold_dbm", map.threshold_dbm}};
}

void emit_coverage(Workspace& ws, Emitter& em)
{
    const auto& map = ws.baseline();
    const auto cdf = rsrp_cdf(map);
    em.text("coverage.csv", [&](std::ostream& o) { write_coverage_csv(map, o); });
    em.text("coverage_cdf.csv", [&](std::ostream& o) { write_cdf_csv(cdf, o); });
    em.json("coverage_summary.json", coverage_summary(map, cdf));
}

void emit_clusters(Workspace& ws, const RunConfig& cfg, Emitter& em)
{
    const auto& map = ws.baseline();
    const auto outage = outage_set(map, cfg.pipeline.threshold_dbm);
    const auto clusters = cluster_tiles(map.grid, outage, cfg.pipeline.t1);
    em.text("clusters.csv", [&](std::ostream& o) { write_clusters_csv(clusters, o); });
    em.text("cluster_membership.csv", [&](std::ostream& o) {
        std::vector<Cluster> by_tile = clusters;
        // Members are grid indices; the writer expects point indices into `tiles`.
        std::map<std::size_t, std::size_t> point_of;
        for (std::size_t i = 0; i < outage.size(); ++i) {
            point_of[outage[i]] = i;
        }
        for (auto& c : by_tile) {
            for (auto& m : c.members) {
                m = point_of.at(m);
            }
        }
        write_membership_csv(by_tile, outage, map.grid, o);
    });
}

void emit_pipeline(const PipelineResult& res, Emitter& em)
{
    const auto report = pipeline_report(res);
    em.json("pipeline_report.json", report);
    em.json("deployments.json", report["deployments"]);
    em.text("topn.csv", [&](std::ostream& o) { write_topn_csv(res.topn_curve, o); });
}

void emit_validation(const ValidationReport& v, const std::string& suffix, Emitter& em)
{
    em.text("region_scatter" + suffix + ".csv", [&](std::ostream& o) { write_region_scatter_csv(v, o); });
    em.text("error_histogram" + suffix + ".csv", [&](std::ostream& o) { write_error_histogram_csv(v, o); });
    em.text("validation_cdf" + suffix + ".csv", [&](std::ostream& o) { write_validation_cdf_csv(v, o); });
}

CalibrationConfig calibration_config(const RunConfig& cfg)
{
    CalibrationConfig c = cfg.calibration;
    c.tile_size = cfg.tile_size;
    c.ue_height = cfg.ue_height;
    return c;
}

void run_calibrate(Workspace& ws, const RunConfig& cfg, Emitter& em)
{
    const auto samples = load_measurements(cfg.measurements_path, cfg.geo);
    const auto ccfg = calibration_config(cfg);
    const auto res = calibrate_scene(ws.scene, ws.network, ws.system, samples, ws.trace, ccfg, ws.options);
    em.json("calibration_report.json", calibration_report(res));
    em.scene("calibrated_scene.json", res.scene);

    const auto before = validation_metrics(ws.engine(), samples, res.regions, ccfg);
    CoverageEngine after_engine(res.scene, ws.network, ws.system, ws.trace, ws.options);
    const auto after = validation_metrics(after_engine, samples, res.regions, ccfg);
    emit_validation(before, "_initial", em);
    emit_validation(after, "", em);
    em.json("validation.json", {{"initial", before.to_json()}, {"calibrated", after.to_json()}});
}

void run_validate(Workspace& ws, const RunConfig& cfg, Emitter& em)
{
    const auto samples = load_measurements(cfg.measurements_path, cfg.geo);
    const auto ccfg = calibration_config(cfg);
    const auto regions = build_target_regions(samples, ws.scene, ccfg);
    const auto v = validation_metrics(ws.engine(), samples, regions, ccfg);
    emit_validation(v, "", em);
    em.json("validation.json", v.to_json());
}

void run_sweep_aperture(Workspace& ws, const RunConfig& cfg, Emitter& em)
{
    std::vector<std::pair<double, double>> rows;
    for (double size : cfg.aperture_sizes) {
        PipelineConfig p = cfg.pipeline;
        p.ris_width = size;
        p.ris_height = size;
        const RisPlanner planner(ws.engine(), ws.baseline(), p);
        const auto res = planner.run();
        rows.emplace_back(size, res.fraction(res.recovered_reassociate));
    }
    em.text("aperture_sweep.csv", [&](std::ostream& o) {
        o << "aperture_m,recovered_fraction\n";
        for (const auto& [size, frac] : rows) {
            o << format_number(size, 3) << ',' << format_number(frac, 6) << '\n';
        }
    });
}

nlohmann::json manifest(const std::string& command, const std::vector<std::string>& args, const RunConfig& cfg,
                        const Emitter& em, double wall_s)
{
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [name, bytes] : em.files()) {
        files.push_back({{"path", name}, {"bytes", bytes}});
    }
    return {{"tool", "risplan"},
            {"version", kVersion},
            {"command", command},
            {"arguments", args},
            {"config", cfg.to_json()},
            {"seed", cfg.calibration.seed},
            {"libraries", {{"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                           {"cli11", CLI11_VERSION}}},
            {"threads", thread_count()},
            {"files", files},
            {"wall_time_s", wall_s}};
}

} // namespace

RunConfig RunConfig::parse(std::istream& in, const std::filesystem::path& base_dir)
{
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const CLI::Error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }

    RunConfig c;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto num = [](double& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) { field = parse_double(k, v); };
    };
    auto integer = [](auto& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) {
            field = static_cast<std::remove_reference_t<decltype(field)>>(parse_integer(k, v));
        };
    };
    auto flag = [](bool& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) { field = parse_bool(k, v); };
    };
    auto path = [&base_dir](std::filesystem::path& field) -> Setter {
        return [&field, &base_dir](const std::string&, const std::string& v) { field = resolve(base_dir, v); };
    };

    const std::map<std::string, Setter> keys{
        {"scene", path(c.scene_path)},
        {"network", path(c.network_path)},
        {"system", [&](const std::string&, const std::string& v) { c.system = v; }},
        {"output_dir", path(c.output_dir)},
        {"grid.tile_size", num(c.tile_size)},
        {"grid.ue_height", num(c.ue_height)},
        {"grid.samples_per_tile", integer(c.samples_per_tile)},
        {"trace.ray_count", integer(c.trace.ray_count)},
        {"trace.max_bounces", integer(c.trace.max_bounces)},
        {"trace.capture_scale", num(c.trace.capture_scale)},
        {"trace.rx_capture_radius", num(c.trace.rx_capture_radius)},
        {"coverage.diffuse", [&](const std::string&, const std::string& v) { c.diffuse = parse_diffuse(v); }},
        {"coverage.scatter_patch_m", num(c.scatter_patch_m)},
        {"pipeline.threshold_dbm", num(c.pipeline.threshold_dbm)},
        {"pipeline.t1", num(c.pipeline.t1)},
        {"pipeline.t2", num(c.pipeline.t2)},
        {"pipeline.effective_fraction", num(c.pipeline.effective_fraction)},
        {"pipeline.ris_width", num(c.pipeline.ris_width)},
        {"pipeline.ris_height", num(c.pipeline.ris_height)},
        {"pipeline.eta", num(c.pipeline.eta)},
        {"pipeline.r", num(c.pipeline.r)},
        {"pipeline.strategy",
         [&](const std::string& k, const std::string& v) {
             try {
                 c.pipeline.strategy = parse_strategy(v);
             } catch (const Error&) {
                 throw ParseError("config key '" + k + "': expected reflection or scattering, got '" + v + "'");
             }
         }},
        {"pipeline.nearby_range_m", num(c.pipeline.nearby_range_m)},
        {"pipeline.max_candidate_evals", integer(c.pipeline.max_candidate_evals)},
        {"pipeline.dedup_m", num(c.pipeline.dedup_m)},
        {"pipeline.scatter_ray_factor", integer(c.pipeline.scatter_ray_factor)},
        {"pipeline.recluster", flag(c.pipeline.recluster)},
        {"pipeline.reassociate", flag(c.pipeline.reassociate)},
        {"pipeline.aperture_sizes",
         [&](const std::string& k, const std::string& v) { c.aperture_sizes = parse_list(k, v); }},
        {"calibration.measurements", path(c.measurements_path)},
        {"calibration.origin_lat", num(c.geo.lat0_deg)},
        {"calibration.origin_lon", num(c.geo.lon0_deg)},
        {"calibration.iterations", integer(c.calibration.iterations_per_cell)},
        {"calibration.lr", num(c.calibration.learning_rate)},
        {"calibration.seed", integer(c.calibration.seed)},
        {"calibration.region_size", num(c.calibration.region_size)},
        {"calibration.min_samples", integer(c.calibration.min_samples)},
        {"calibration.group_radius", num(c.calibration.group_radius)},
        {"calibration.outlier_gap_db", num(c.calibration.outlier_gap_db)},
    };

    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") {
            continue; // section markers
        }
        std::string key;
        for (const auto& p : item.parents) {
            key += p + ".";
        }
        key += item.name;
        const auto it = keys.find(key);
        if (it == keys.end()) {
            throw ParseError("config: unknown key '" + key + "'");
        }
        std::string value;
        for (std::size_t i = 0; i < item.inputs.size(); ++i) {
            value += (i ? "," : "") + item.inputs[i];
        }
        it->second(key, value);
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open config file " + path.string());
    }
    return parse(in, path.parent_path());
}

void RunConfig::validate(bool need_measurements) const
{
    require_file(scene_path, "scene");
    require_file(network_path, "network");
    if (need_measurements) {
        require_file(measurements_path, "measurements");
    }
    if (system != "4G" && system != "5G" && system != "6G") {
        throw InvariantError("system must be 4G, 5G or 6G, got '" + system + "'");
    }
    if (!(tile_size > 0.0) || !(ue_height > 0.0)) {
        throw InvariantError("grid: tile_size and ue_height must be positive");
    }
    if (samples_per_tile != 1 && samples_per_tile != 5) {
        throw InvariantError("grid: samples_per_tile must be 1 or 5");
    }
    if (!(scatter_patch_m > 0.0)) {
        throw InvariantError("coverage: scatter_patch_m must be positive");
    }
    for (double s : aperture_sizes) {
        if (!(s > 0.0)) {
            throw InvariantError("aperture sizes must be positive");
        }
    }
    trace.validate();
    pipeline.validate();
    calibration.validate();
}

nlohmann::json RunConfig::to_json() const
{
    return {{"scene", scene_path.string()},
            {"network", network_path.string()},
            {"system", system},
            {"output_dir", output_dir.string()},
            {"grid", {{"tile_size", tile_size}, {"ue_height", ue_height}, {"samples_per_tile", samples_per_tile}}},
            {"trace",
             {{"ray_count", trace.ray_count},
              {"max_bounces", trace.max_bounces},
              {"capture_scale", trace.capture_scale},
              {"rx_capture_radius", trace.rx_capture_radius}}},
            {"coverage", {{"diffuse", diffuse_name(diffuse)}, {"scatter_patch_m", scatter_patch_m}}},
            {"pipeline",
             {{"threshold_dbm", pipeline.threshold_dbm},
              {"t1", pipeline.t1},
              {"t2", pipeline.t2},
              {"effective_fraction", pipeline.effective_fraction},
              {"ris_width", pipeline.ris_width},
              {"ris_height", pipeline.ris_height},
              {"eta", pipeline.eta},
              {"r", pipeline.r},
              {"strategy", to_string(pipeline.strategy)},
              {"nearby_range_m", pipeline.nearby_range_m},
              {"max_candidate_evals", pipeline.max_candidate_evals},
              {"dedup_m", pipeline.dedup_m},
              {"scatter_ray_factor", pipeline.scatter_ray_factor},
              {"recluster", pipeline.recluster},
              {"reassociate", pipeline.reassociate},
              {"aperture_sizes", aperture_sizes}}},
            {"calibration",
             {{"measurements", measurements_path.string()},
              {"origin_lat", geo.lat0_deg},
              {"origin_lon", geo.lon0_deg},
              {"iterations", calibration.iterations_per_cell},
              {"lr", calibration.learning_rate},
              {"seed", calibration.seed},
              {"region_size", calibration.region_size},
              {"min_samples", calibration.min_samples},
              {"group_radius", calibration.group_radius},
              {"outlier_gap_db", calibration.outlier_gap_db}}}};
}

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"RIS deployment planning: coverage, clustering, placement and calibration", "risplan"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", kVersion);

    struct Common {
        std::string config;
        std::string scene;
        std::string network;
        std::string output;
        std::string system;
        std::string measurements;
        std::vector<double> sizes;
    } opt;

    auto add = [&](const std::string& name, const std::string& help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", opt.config, "run configuration (key = value, [sections])")->required();
        sub->add_option("--scene", opt.scene, "scene JSON, overrides the config");
        sub->add_option("--network", opt.network, "network JSON, overrides the config");
        sub->add_option("-o,--output", opt.output, "output directory, overrides the config");
        sub->add_option("--system", opt.system, "4G, 5G or 6G, overrides the config");
        return sub;
    };
    add("coverage", "best-server coverage map, CDF and outage summary");
    add("cluster", "outage tiles clustered with BIRCH");
    add("place", "full RIS placement pipeline");
    add("calibrate", "fit building materials to measured RSRP")
        ->add_option("--measurements", opt.measurements, "measurement CSV, overrides the config");
    add("validate", "compare a scene against measured RSRP")
        ->add_option("--measurements", opt.measurements, "measurement CSV, overrides the config");
    add("sweep-density", "recovery against the number of prioritized clusters");
    add("sweep-aperture", "recovery against the RIS aperture size")
        ->add_option("--sizes", opt.sizes, "aperture side lengths in metres")
        ->delimiter(',');

    if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
        err << "risplan: unknown subcommand '" << argv[1]
            << "' (expected coverage, cluster, place, calibrate, validate, sweep-density or sweep-aperture)\n";
        return kExitUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        const int code = app.exit(e, out, msg);
        if (code == 0) {
            return kExitOk;
        }
        err << "risplan: " << e.what() << '\n';
        return kExitUsage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    const std::vector<std::string> args(argv + 1, argv + argc);
    const auto start = std::chrono::steady_clock::now();
    try {
        RunConfig cfg;
        try {
            cfg = RunConfig::load(opt.config);
        } catch (const Error& e) {
            throw ParseError(e.what());
        }
        if (!opt.scene.empty()) {
            cfg.scene_path = opt.scene;
        }
        if (!opt.network.empty()) {
            cfg.network_path = opt.network;
        }
        if (!opt.output.empty()) {
            cfg.output_dir = opt.output;
        }
        if (!opt.system.empty()) {
            cfg.system = opt.system;
        }
        if (!opt.measurements.empty()) {
            cfg.measurements_path = opt.measurements;
        }
        if (!opt.sizes.empty()) {
            cfg.aperture_sizes = opt.sizes;
        }
        cfg.validate(command == "calibrate" || command == "validate");

        Workspace ws(cfg);
        Emitter em(cfg.output_dir);
        if (command == "coverage") {
            emit_coverage(ws, em);
        } else if (command == "cluster") {
            emit_clusters(ws, cfg, em);
        } else if (command == "place") {
            const RisPlanner planner(ws.engine(), ws.baseline(), cfg.pipeline);
            emit_pipeline(planner.run(), em);
        } else if (command == "sweep-density") {
            const RisPlanner planner(ws.engine(), ws.baseline(), cfg.pipeline);
            const auto res = planner.run();
            const auto sweep = planner.density_sweep(res);
            em.text("density_sweep.csv", [&](std::ostream& o) { write_density_csv(sweep, o); });
        } else if (command == "calibrate") {
            run_calibrate(ws, cfg, em);
        } else if (command == "validate") {
            run_validate(ws, cfg, em);
        } else if (command == "sweep-aperture") {
            run_sweep_aperture(ws, cfg, em);
        }

        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const auto man = manifest(command, args, cfg, em, wall);
        std::ofstream mf(em.dir() / "manifest.json", std::ios::binary);
        mf << man.dump(2) << '\n';
        mf.close();
        if (!mf) {
            throw IoError("cannot write " + (em.dir() / "manifest.json").string());
        }
        out << command << ": wrote " << em.files().size() + 1 << " files to " << em.dir().string() << '\n';
        return kExitOk;
    } catch (const IoError& e) {
        err << "risplan: " << e.what() << '\n';
        return kExitIo;
    } catch (const ParseError& e) {
        err << "risplan: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvariantError& e) {
        err << "risplan: invariant violated: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const PreconditionError& e) {
        err << "risplan: invariant violated: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const std::exception& e) {
        err << "risplan: " << e.what() << '\n';
        return kExitFailure;
    }
}

} // namespace risplan
