// SPDX-License-Identifier: Apache-2.0

#include "risplan/calibration.hpp"

#include "risplan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace risplan {

namespace {

// Point RSRP entering the loss is floored here so that a material pushed to
// Gamma = 0 still yields a finite, differentiable region average.
constexpr double kLossFloorDbm = -200.0;

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

double parse_double(const std::string& s, std::size_t line, const char* what)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw ParseError("measurements line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
    }
}

bool parse_bool(const std::string& s, std::size_t line)
{
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (l.empty() || l == "0" || l == "false" || l == "no") {
        return false;
    }
    if (l == "1" || l == "true" || l == "yes") {
        return true;
    }
    throw ParseError("measurements line " + std::to_string(line) + ": bad indoor flag '" + s + "'");
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b)
{
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    return norm(p - (a + ab * t));
}

bool inside_polygon(const Vec2& p, const std::vector<Vec2>& poly)
{
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
            in = !in;
        }
    }
    return in;
}

double footprint_distance(const Vec2& p, const std::vector<Vec2>& poly)
{
    if (inside_polygon(p, poly)) {
        return 0.0;
    }
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        d = std::min(d, point_segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
    }
    return d;
}

int table_index(const Scene& scene, int face)
{
    if (face >= 0 && face < static_cast<int>(scene.faces().size())) {
        const int b = scene.faces()[static_cast<std::size_t>(face)].building;
        if (b >= 0) {
            return b;
        }
    }
    return static_cast<int>(scene.buildings().size());
}

double mean_finite(std::span<const double> v)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (std::isfinite(x)) {
            sum += x;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    std::vector<CdfPoint> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i + 1 < v.size() && v[i + 1] == v[i]) {
            continue;
        }
        out.push_back({v[i], static_cast<double>(i + 1) / static_cast<double>(v.size())});
    }
    return out;
}

} // namespace

Vec2 GeoReference::project(double lat_deg, double lon_deg) const
{
    const double k = kPi / 180.0;
    return {kEarthRadiusM * (lon_deg - lon0_deg) * k * std::cos(lat0_deg * k), kEarthRadiusM * (lat_deg - lat0_deg) * k};
}

std::vector<MeasurementSample> read_measurements_csv(std::istream& in, const GeoReference& ref)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("measurements: empty file");
    }
    const auto header = split_csv(line);
    auto column = [&](const std::string& name) -> int {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int c_lat = column("lat");
    const int c_lon = column("lon");
    const int c_rsrp = column("rsrp_dbm");
    const int c_sinr = column("sinr_db");
    const int c_indoor = column("indoor");
    if (c_lat < 0 || c_lon < 0 || c_rsrp < 0) {
        throw ParseError("measurements: header must contain lat, lon and rsrp_dbm");
    }
    std::vector<MeasurementSample> out;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto f = split_csv(line);
        auto field = [&](int c) { return c >= 0 && static_cast<std::size_t>(c) < f.size() ? f[static_cast<std::size_t>(c)] : std::string(); };
        MeasurementSample s;
        const double lat = parse_double(field(c_lat), n, "lat");
        const double lon = parse_double(field(c_lon), n, "lon");
        const Vec2 p = ref.project(lat, lon);
        s.x = p.x;
        s.y = p.y;
        s.rsrp_dbm = parse_double(field(c_rsrp), n, "rsrp_dbm");
        if (!field(c_sinr).empty()) {
            s.sinr_db = parse_double(field(c_sinr), n, "sinr_db");
        }
        s.outdoor = !parse_bool(field(c_indoor), n);
        if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.rsrp_dbm)) {
            throw ParseError("measurements line " + std::to_string(n) + ": non-finite value");
        }
        out.push_back(s);
    }
    return out;
}

std::vector<MeasurementSample> load_measurements(const std::filesystem::path& path, const GeoReference& ref)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open measurements file " + path.string());
    }
    return read_measurements_csv(in, ref);
}

void write_measurements_csv(std::span<const MeasurementSample> samples, const GeoReference& ref, std::ostream& out)
{
    const double k = 180.0 / kPi;
    out << "lat,lon,rsrp_dbm,sinr_db,indoor\n";
    for (const auto& s : samples) {
        const double lat = ref.lat0_deg + s.y / kEarthRadiusM * k;
        const double lon = ref.lon0_deg + s.x / (kEarthRadiusM * std::cos(ref.lat0_deg / k)) * k;
        out << format_number(lat, 9) << ',' << format_number(lon, 9) << ',' << format_number(s.rsrp_dbm, 3) << ','
            << (std::isfinite(s.sinr_db) ? format_number(s.sinr_db, 3) : std::string()) << ',' << (s.outdoor ? 0 : 1)
            << '\n';
    }
}

MaterialParams ParamBounds::clamp(MaterialParams p) const
{
    for (int i = 0; i < 3; ++i) {
        p[i] = std::clamp(p[i], lower[i], upper[i]);
    }
    return p;
}

bool ParamBounds::contains(const MaterialParams& p) const
{
    for (int i = 0; i < 3; ++i) {
        if (!(p[i] >= lower[i] && p[i] <= upper[i])) {
            return false;
        }
    }
    return true;
}

void CalibrationConfig::validate() const
{
    if (iterations_per_cell < 0 || !(learning_rate > 0.0) || !(region_size > 0.0) || min_samples < 1 ||
        !(tile_size > 0.0) || !(fd_step > 0.0) || !(group_radius >= 0.0)) {
        throw InvariantError("invalid calibration settings");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_epsilon > 0.0)) {
        throw InvariantError("invalid Adam settings");
    }
    if (!bounds.contains(initial)) {
        throw InvariantError("initial material parameters outside their bounds");
    }
}

GroupTable GroupTable::of(const Scene& scene)
{
    GroupTable g;
    std::map<std::string, int> index;
    for (const auto& b : scene.buildings()) {
        const std::string name = b.group_id ? *b.group_id : b.id;
        auto [it, fresh] = index.try_emplace(name, static_cast<int>(g.names.size()));
        if (fresh) {
            g.names.push_back(name);
        }
        g.group_of_building.push_back(it->second);
    }
    return g;
}

const char* to_string(ExclusionReason r)
{
    switch (r) {
    case ExclusionReason::None:
        return "none";
    case ExclusionReason::InitialGap:
        return "initial_gap";
    case ExclusionReason::FreeSpaceExtreme:
        return "free_space_extreme";
    case ExclusionReason::ReflectiveExtreme:
        return "reflective_extreme";
    case ExclusionReason::NoSignal:
        return "no_signal";
    }
    return "?";
}

std::vector<TargetRegion> build_target_regions(std::span<const MeasurementSample> samples, const Scene& scene,
                                               const CalibrationConfig& cfg)
{
    cfg.validate();
    std::map<std::pair<long, long>, std::vector<std::size_t>> cells; // keyed (iy, ix)
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!s.outdoor || scene.is_indoor({s.x, s.y, cfg.ue_height})) {
            continue;
        }
        const long ix = static_cast<long>(std::floor(s.x / cfg.region_size));
        const long iy = static_cast<long>(std::floor(s.y / cfg.region_size));
        cells[{iy, ix}].push_back(i);
    }
    const GroupTable groups = GroupTable::of(scene);
    std::vector<TargetRegion> out;
    for (auto& [key, members] : cells) {
        if (static_cast<int>(members.size()) < cfg.min_samples) {
            continue;
        }
        TargetRegion r;
        r.iy = static_cast<int>(key.first);
        r.ix = static_cast<int>(key.second);
        r.bounds = {{r.ix * cfg.region_size, r.iy * cfg.region_size},
                    {(r.ix + 1) * cfg.region_size, (r.iy + 1) * cfg.region_size}};
        double sum = 0.0;
        for (std::size_t m : members) {
            sum += samples[m].rsrp_dbm;
        }
        r.avg_measured_dbm = sum / static_cast<double>(members.size());
        r.samples = std::move(members);
        std::vector<bool> near(groups.size(), false);
        for (std::size_t b = 0; b < scene.buildings().size(); ++b) {
            if (footprint_distance(r.center(), scene.buildings()[b].footprint) <= cfg.group_radius) {
                near[static_cast<std::size_t>(groups.group_of_building[b])] = true;
            }
        }
        for (std::size_t g = 0; g < near.size(); ++g) {
            if (near[g]) {
                r.groups.push_back(static_cast<int>(g));
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<Vec3> region_points(const TargetRegion& region, const Scene& scene, const CalibrationConfig& cfg)
{
    const int n = std::max(1, static_cast<int>(std::round(region.bounds.width() / cfg.tile_size)));
    const double step = region.bounds.width() / n;
    std::vector<Vec3> out;
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const Vec3 p{region.bounds.min.x + (ix + 0.5) * step, region.bounds.min.y + (iy + 0.5) * step,
                         cfg.ue_height};
            if (!scene.is_indoor(p)) {
                out.push_back(p);
            }
        }
    }
    return out;
}

RegionModel::RegionModel(const CoverageEngine& engine, std::span<const Vec3> points) : engine_(engine)
{
    const Scene& scene = engine.scene();
    const double f = engine.system().frequency;
    const double lambda = wavelength(f);
    const Codebook& cb = engine.codebook();
    const auto& sites = engine.network().sites;
    points_.resize(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        const Vec3& rx = points[i];
        Point& pt = points_[i];
        pt.links.resize(sites.size());
        for (std::size_t bs = 0; bs < sites.size(); ++bs) {
            const LinkGeometry geo = engine.geometry(static_cast<int>(bs), rx);
            Link& link = pt.links[bs];
            link.sectors = sites[bs].sectors.size();
            for (const auto& p : geo.specular) {
                PathTerm t;
                t.path = p;
                for (auto& it : t.path.interactions) {
                    if (it.kind == InteractionKind::SpecularReflection || it.kind == InteractionKind::DiffuseScatter) {
                        it.material = table_index(scene, it.face);
                    }
                }
                for (std::size_t s = 0; s < link.sectors; ++s) {
                    const SectorArray& arr = engine.sector(static_cast<int>(bs), static_cast<int>(s));
                    std::vector<cplx> h(static_cast<std::size_t>(arr.size()), cplx{});
                    accumulate_path(h, arr, p.departure_dir, 1.0);
                    t.unit_h.push_back(std::move(h));
                }
                link.paths.push_back(std::move(t));
            }
            for (const DiffusePatch* patch : geo.diffuse) {
                PatchTerm t;
                t.material = table_index(scene, patch->face);
                const Vec3 out_vec = rx - patch->center;
                const double d2 = norm(out_vec);
                const double cos_s = dot(out_vec, patch->normal) / d2;
                const double total = patch->distance + d2;
                const double lobe2 = std::min(1.0, (total / d2) * (total / d2) * patch->solid_angle * cos_s / kPi);
                const double fs = lambda / (4.0 * kPi * total);
                t.base = fs * fs * lobe2;
                t.cos_incidence = patch->cos_incidence;
                t.pol = polarization_for_normal(patch->normal);
                for (std::size_t s = 0; s < link.sectors; ++s) {
                    const SectorArray& arr = engine.sector(static_cast<int>(bs), static_cast<int>(s));
                    std::vector<cplx> a(static_cast<std::size_t>(arr.size()), cplx{});
                    accumulate_path(a, arr, patch->departure, 1.0);
                    t.beam_gain.push_back(cb.gains(a));
                }
                link.patches.push_back(std::move(t));
            }
        }
    });
}

std::vector<double> RegionModel::rsrp(std::span<const Material> table) const
{
    const double f = engine_.system().frequency;
    const Codebook& cb = engine_.codebook();
    const std::size_t beams = static_cast<std::size_t>(cb.size());
    std::vector<double> out(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
        std::vector<std::vector<std::vector<double>>> gains(points_[i].links.size());
        for (std::size_t bs = 0; bs < points_[i].links.size(); ++bs) {
            const Link& link = points_[i].links[bs];
            std::vector<cplx> amps;
            amps.reserve(link.paths.size());
            for (const auto& t : link.paths) {
                amps.push_back(path_amplitude(t.path, f, table));
            }
            std::vector<double> dg;
            dg.reserve(link.patches.size());
            for (const auto& t : link.patches) {
                const Material& m = table[static_cast<std::size_t>(t.material)];
                dg.push_back(t.base * m.scatter_s * std::norm(fresnel_coefficient(m, f, t.cos_incidence, t.pol)));
            }
            gains[bs].resize(link.sectors);
            for (std::size_t s = 0; s < link.sectors; ++s) {
                std::vector<cplx> h(link.paths.empty() ? 0 : link.paths[0].unit_h[s].size(), cplx{});
                for (std::size_t k = 0; k < link.paths.size(); ++k) {
                    const auto& u = link.paths[k].unit_h[s];
                    for (std::size_t e = 0; e < h.size(); ++e) {
                        h[e] += amps[k] * u[e];
                    }
                }
                std::vector<double> g = h.empty() ? std::vector<double>(beams, 0.0) : cb.gains(h);
                for (std::size_t k = 0; k < link.patches.size(); ++k) {
                    if (!(dg[k] > 0.0)) {
                        continue;
                    }
                    const auto& pg = link.patches[k].beam_gain[s];
                    for (std::size_t b = 0; b < beams; ++b) {
                        g[b] += dg[k] * pg[b];
                    }
                }
                gains[bs][s] = std::move(g);
            }
        }
        out[i] = pick_best(gains, engine_.system()).rsrp_dbm;
    }
    return out;
}

double RegionModel::average_rsrp(std::span<const Material> table) const
{
    const auto v = rsrp(table);
    return mean_finite(v);
}

std::vector<Material> material_table(const Scene& scene, const GroupTable& groups,
                                     std::span<const std::optional<MaterialParams>> group_params)
{
    std::vector<Material> table;
    table.reserve(scene.buildings().size() + 1);
    for (std::size_t b = 0; b < scene.buildings().size(); ++b) {
        const int g = groups.group_of_building[b];
        const auto& p = group_params[static_cast<std::size_t>(g)];
        if (p) {
            table.push_back({"cal_" + groups.names[static_cast<std::size_t>(g)], p->eps_r, p->sigma, p->scatter_s});
        } else {
            table.push_back(scene.materials()[static_cast<std::size_t>(scene.material_index(scene.buildings()[b].material_id))]);
        }
    }
    if (scene.has_reflecting_ground()) {
        table.push_back(scene.materials()[static_cast<std::size_t>(scene.ground_material())]);
    } else {
        table.push_back({"no_ground", 1.0, 0.0, 0.0});
    }
    return table;
}

Scene calibrated_scene(const Scene& scene, const GroupTable& groups,
                       std::span<const std::optional<MaterialParams>> group_params)
{
    std::vector<Material> materials = scene.materials();
    std::vector<std::string> ids;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (const auto& p = group_params[g]) {
            std::string id = "cal_" + groups.names[g];
            auto taken = [&](const std::string& name) {
                return std::any_of(materials.begin(), materials.end(), [&](const Material& m) { return m.id == name; });
            };
            while (taken(id)) {
                id += "_";
            }
            materials.push_back({id, p->eps_r, p->sigma, p->scatter_s});
        }
    }
    for (std::size_t b = 0; b < scene.buildings().size(); ++b) {
        const int g = groups.group_of_building[b];
        if (group_params[static_cast<std::size_t>(g)]) {
            // Calibrated materials were appended in group order.
            int k = 0;
            for (int h = 0; h < g; ++h) {
                k += group_params[static_cast<std::size_t>(h)] ? 1 : 0;
            }
            ids.push_back(materials[scene.materials().size() + static_cast<std::size_t>(k)].id);
        } else {
            ids.push_back(scene.buildings()[b].material_id);
        }
    }
    return scene.with_materials(std::move(materials), ids);
}

double region_loss(double simulated_dbm, double measured_dbm)
{
    const double d = simulated_dbm - measured_dbm;
    return d * d;
}

void adam_update(std::vector<double>& params, std::span<const double> grad, std::span<const std::size_t> active,
                 AdamState& state, const CalibrationConfig& cfg, std::span<const double> lower,
                 std::span<const double> upper)
{
    state.m.resize(params.size(), 0.0);
    state.v.resize(params.size(), 0.0);
    state.t.resize(params.size(), 0);
    for (std::size_t i : active) {
        const double g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const int t = ++state.t[i];
        const double mhat = state.m[i] / (1.0 - std::pow(cfg.beta1, t));
        const double vhat = state.v[i] / (1.0 - std::pow(cfg.beta2, t));
        params[i] = std::clamp(params[i] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon), lower[i],
                               upper[i]);
    }
}

std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                const std::vector<double>& params, std::span<const std::size_t> active,
                                std::span<const double> lower, std::span<const double> upper, double rel_step)
{
    std::vector<double> grad(params.size(), 0.0);
    std::vector<double> values(2 * active.size(), 0.0);
    std::vector<double> span_of(active.size(), 0.0);
    parallel_for(2 * active.size(), [&](std::size_t k) {
        const std::size_t i = active[k / 2];
        const double h = rel_step * (upper[i] - lower[i]);
        std::vector<double> probe = params;
        probe[i] = (k % 2 == 0) ? std::min(params[i] + h, upper[i]) : std::max(params[i] - h, lower[i]);
        values[k] = f(probe);
    });
    for (std::size_t a = 0; a < active.size(); ++a) {
        const std::size_t i = active[a];
        const double h = rel_step * (upper[i] - lower[i]);
        const double hi = std::min(params[i] + h, upper[i]);
        const double lo = std::max(params[i] - h, lower[i]);
        grad[i] = hi > lo ? (values[2 * a] - values[2 * a + 1]) / (hi - lo) : 0.0;
    }
    return grad;
}

CalibrationResult calibrate_scene(const Scene& scene, const Network& network, const SystemConfig& system,
                                  std::span<const MeasurementSample> samples, const TraceConfig& trace,
                                  const CalibrationConfig& cfg, const CoverageOptions& options)
{
    cfg.validate();
    CalibrationResult res(scene);
    res.groups = GroupTable::of(scene);
    const std::size_t ng = res.groups.size();
    res.params.assign(ng, std::nullopt);
    res.frozen.assign(ng, false);
    res.regions = build_target_regions(samples, scene, cfg);
    if (res.regions.empty()) {
        res.warnings.push_back("no target region has enough samples; scene left unchanged");
        return res;
    }

    // Every group near a target region starts from the initial parameters.
    for (const auto& r : res.regions) {
        for (int g : r.groups) {
            res.params[static_cast<std::size_t>(g)] = cfg.initial;
        }
    }
    const Scene start = calibrated_scene(scene, res.groups, res.params);
    TraceConfig tc = trace;
    tc.frequency = system.frequency;
    CoverageEngine engine(start, network, system, tc, options);
    engine.index_height(cfg.ue_height);

    std::vector<std::unique_ptr<RegionModel>> models;
    for (const auto& r : res.regions) {
        const auto pts = region_points(r, scene, cfg);
        models.push_back(std::make_unique<RegionModel>(engine, pts));
    }

    // Flattened parameter vector: 3 entries per group.
    std::vector<double> x(3 * ng, 0.0);
    std::vector<double> lo(3 * ng, 0.0);
    std::vector<double> hi(3 * ng, 0.0);
    for (std::size_t g = 0; g < ng; ++g) {
        for (int k = 0; k < 3; ++k) {
            x[3 * g + static_cast<std::size_t>(k)] = res.params[g] ? (*res.params[g])[k] : 0.0;
            lo[3 * g + static_cast<std::size_t>(k)] = cfg.bounds.lower[k];
            hi[3 * g + static_cast<std::size_t>(k)] = cfg.bounds.upper[k];
        }
    }
    auto params_of = [&](const std::vector<double>& v) {
        std::vector<std::optional<MaterialParams>> p = res.params;
        for (std::size_t g = 0; g < ng; ++g) {
            if (p[g]) {
                p[g] = MaterialParams{v[3 * g], v[3 * g + 1], v[3 * g + 2]};
            }
        }
        return p;
    };
    auto simulate = [&](std::size_t r, const std::vector<double>& v) {
        const auto table = material_table(scene, res.groups, params_of(v));
        return mean_finite(models[r]->rsrp(table));
    };
    auto loss = [&](std::size_t r, const std::vector<double>& v) {
        const auto table = material_table(scene, res.groups, params_of(v));
        auto pts = models[r]->rsrp(table);
        for (double& p : pts) {
            p = std::max(p, kLossFloorDbm);
        }
        return region_loss(mean_finite(pts), res.regions[r].avg_measured_dbm);
    };

    res.initial_region_dbm.resize(res.regions.size());
    for (std::size_t r = 0; r < res.regions.size(); ++r) {
        res.initial_region_dbm[r] = simulate(r, x);
        auto& reg = res.regions[r];
        if (!std::isfinite(res.initial_region_dbm[r])) {
            reg.excluded = ExclusionReason::NoSignal;
        } else if (std::abs(res.initial_region_dbm[r] - reg.avg_measured_dbm) > cfg.outlier_gap_db) {
            reg.excluded = ExclusionReason::InitialGap;
        }
        // Cell: the sector serving the region centre (or its first outdoor point).
        Vec3 c{reg.center().x, reg.center().y, cfg.ue_height};
        if (scene.is_indoor(c)) {
            const auto pts = region_points(reg, scene, cfg);
            if (!pts.empty()) {
                c = pts.front();
            }
        }
        const auto best = engine.best_server(c);
        if (best.serving.valid()) {
            int flat = 0;
            for (int b = 0; b < best.serving.bs; ++b) {
                flat += static_cast<int>(network.sites[static_cast<std::size_t>(b)].sectors.size());
            }
            reg.cell = flat + best.serving.sector;
        }
    }

    std::map<int, CellLog> cells;
    for (std::size_t r = 0; r < res.regions.size(); ++r) {
        const auto& reg = res.regions[r];
        if (reg.excluded != ExclusionReason::None) {
            continue;
        }
        CellLog& c = cells[reg.cell];
        c.cell = reg.cell;
        c.sample_count += reg.samples.size();
        c.regions.push_back(r);
    }
    std::vector<CellLog> order;
    for (auto& [id, c] : cells) {
        order.push_back(std::move(c));
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const CellLog& a, const CellLog& b) { return a.sample_count > b.sample_count; });
    if (order.empty()) {
        res.warnings.push_back("every target region was excluded; scene left unchanged");
    }

    std::mt19937_64 rng(cfg.seed);
    for (CellLog& cell : order) {
        std::vector<bool> learn(ng, false);
        for (std::size_t r : cell.regions) {
            for (int g : res.regions[r].groups) {
                if (!res.frozen[static_cast<std::size_t>(g)]) {
                    learn[static_cast<std::size_t>(g)] = true;
                }
            }
        }
        for (std::size_t g = 0; g < ng; ++g) {
            if (learn[g]) {
                cell.groups.push_back(static_cast<int>(g));
            }
        }
        const std::vector<double> x_start = x;
        std::vector<std::size_t> active_regions = cell.regions;
        for (int attempt = 0; attempt < 2; ++attempt) {
            x = x_start;
            AdamState state;
            std::vector<std::vector<double>> traj;
            if (!cell.groups.empty() && !active_regions.empty()) {
                std::uniform_int_distribution<std::size_t> pick(0, active_regions.size() - 1);
                for (int it = 0; it < cfg.iterations_per_cell; ++it) {
                    const std::size_t r = active_regions[pick(rng)];
                    std::vector<std::size_t> coords;
                    for (int g : res.regions[r].groups) {
                        if (learn[static_cast<std::size_t>(g)]) {
                            for (std::size_t k = 0; k < 3; ++k) {
                                coords.push_back(3 * static_cast<std::size_t>(g) + k);
                            }
                        }
                    }
                    if (!coords.empty()) {
                        const auto grad = fd_gradient([&](const std::vector<double>& v) { return loss(r, v); }, x,
                                                      coords, lo, hi, cfg.fd_step);
                        adam_update(x, grad, coords, state, cfg, lo, hi);
                    }
                    traj.push_back(x);
                }
            }
            // High residual loss with a parameter pinned at an extreme: the
            // region is not explained by materials, drop it and redo the cell.
            bool dropped = false;
            if (attempt == 0) {
                for (std::size_t r : active_regions) {
                    if (!(loss(r, x) > cfg.high_loss)) {
                        continue;
                    }
                    bool at_low = false;
                    bool at_high = false;
                    for (int g : res.regions[r].groups) {
                        if (!learn[static_cast<std::size_t>(g)]) {
                            continue;
                        }
                        for (int k = 0; k < 3; ++k) {
                            const std::size_t i = 3 * static_cast<std::size_t>(g) + static_cast<std::size_t>(k);
                            const double m = cfg.bound_margin * (hi[i] - lo[i]);
                            at_low = at_low || x[i] <= lo[i] + m;
                            at_high = at_high || x[i] >= hi[i] - m;
                        }
                    }
                    if (at_low || at_high) {
                        res.regions[r].excluded =
                            at_low ? ExclusionReason::FreeSpaceExtreme : ExclusionReason::ReflectiveExtreme;
                        dropped = true;
                    }
                }
            }
            if (!dropped) {
                res.trajectory.insert(res.trajectory.end(), traj.begin(), traj.end());
                break;
            }
            std::vector<std::size_t> keep;
            for (std::size_t r : active_regions) {
                if (res.regions[r].excluded == ExclusionReason::None) {
                    keep.push_back(r);
                }
            }
            active_regions = std::move(keep);
            ++cell.restarts;
        }
        for (int g : cell.groups) {
            res.frozen[static_cast<std::size_t>(g)] = true;
        }
    }

    res.params = params_of(x);
    res.final_region_dbm.resize(res.regions.size());
    for (std::size_t r = 0; r < res.regions.size(); ++r) {
        res.final_region_dbm[r] = simulate(r, x);
    }
    res.cells = std::move(order);
    res.scene = calibrated_scene(scene, res.groups, res.params);
    return res;
}

ErrorStats error_stats(std::span<const double> values)
{
    ErrorStats s;
    s.count = values.size();
    if (values.empty()) {
        return s;
    }
    std::vector<double> v(values.begin(), values.end());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    if (n > 1) {
        double ss = 0.0;
        for (double x : v) {
            ss += (x - s.mean) * (x - s.mean);
        }
        s.std = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return s;
}

nlohmann::json ValidationReport::to_json() const
{
    auto stats_json = [](const ErrorStats& s) {
        return nlohmann::json{{"count", s.count}, {"mean_db", s.mean}, {"median_db", s.median}, {"std_db", s.std}};
    };
    nlohmann::json j;
    j["sample_errors"] = stats_json(stats);
    j["region_errors"] = stats_json(region_stats);
    j["regions"] = nlohmann::json::array();
    for (const auto& r : regions) {
        j["regions"].push_back({{"region", r.region},
                                {"simulated_dbm", std::isfinite(r.simulated_dbm) ? nlohmann::json(r.simulated_dbm) : nlohmann::json()},
                                {"measured_dbm", r.measured_dbm},
                                {"excluded", r.excluded}});
    }
    return j;
}

ValidationReport validation_metrics(const CoverageEngine& engine, std::span<const MeasurementSample> samples,
                                    std::span<const TargetRegion> regions, const CalibrationConfig& cfg)
{
    const Scene& scene = engine.scene();
    ValidationReport rep;
    std::vector<bool> skip(samples.size(), false);
    std::vector<double> region_errors;
    for (std::size_t r = 0; r < regions.size(); ++r) {
        const auto& reg = regions[r];
        const bool excluded = reg.excluded != ExclusionReason::None;
        const auto pts = region_points(reg, scene, cfg);
        std::vector<double> v(pts.size());
        parallel_for(pts.size(), [&](std::size_t i) { v[i] = engine.best_server(pts[i]).rsrp_dbm; });
        const double sim = mean_finite(v);
        rep.regions.push_back({r, sim, reg.avg_measured_dbm, excluded});
        if (excluded) {
            for (std::size_t s : reg.samples) {
                skip[s] = true;
            }
        } else if (std::isfinite(sim)) {
            region_errors.push_back(sim - reg.avg_measured_dbm);
        }
    }
    std::vector<double> sim(samples.size(), -std::numeric_limits<double>::infinity());
    parallel_for(samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        const Vec3 p{s.x, s.y, cfg.ue_height};
        if (!skip[i] && s.outdoor && !scene.is_indoor(p)) {
            sim[i] = engine.best_server(p).rsrp_dbm;
        }
    });
    std::vector<double> sim_used;
    std::vector<double> meas_used;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (std::isfinite(sim[i])) {
            rep.sample_errors.push_back(sim[i] - samples[i].rsrp_dbm);
            sim_used.push_back(sim[i]);
            meas_used.push_back(samples[i].rsrp_dbm);
        }
    }
    rep.simulated_cdf = empirical_cdf(sim_used);
    rep.measured_cdf = empirical_cdf(meas_used);
    rep.stats = error_stats(rep.sample_errors);
    rep.region_stats = error_stats(region_errors);
    return rep;
}

void write_region_scatter_csv(const ValidationReport& r, std::ostream& out)
{
    out << "region,simulated_dbm,measured_dbm,excluded\n";
    for (const auto& p : r.regions) {
        out << p.region << ',' << format_number(p.simulated_dbm, 3) << ',' << format_number(p.measured_dbm, 3) << ','
            << (p.excluded ? 1 : 0) << '\n';
    }
}

void write_error_histogram_csv(const ValidationReport& r, std::ostream& out, double bin_db)
{
    out << "bin_low_db,bin_high_db,count\n";
    if (r.sample_errors.empty()) {
        return;
    }
    const auto [mn, mx] = std::minmax_element(r.sample_errors.begin(), r.sample_errors.end());
    const long first = static_cast<long>(std::floor(*mn / bin_db));
    const long last = static_cast<long>(std::floor(*mx / bin_db));
    std::vector<std::size_t> counts(static_cast<std::size_t>(last - first + 1), 0);
    for (double e : r.sample_errors) {
        ++counts[static_cast<std::size_t>(static_cast<long>(std::floor(e / bin_db)) - first)];
    }
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double low = static_cast<double>(first + static_cast<long>(k)) * bin_db;
        out << format_number(low, 3) << ',' << format_number(low + bin_db, 3) << ',' << counts[k] << '\n';
    }
}

void write_validation_cdf_csv(const ValidationReport& r, std::ostream& out)
{
    out << "series,rsrp_dbm,cdf\n";
    for (const auto& p : r.simulated_cdf) {
        out << "simulated," << format_number(p.rsrp_dbm, 3) << ',' << format_number(p.cdf, 6) << '\n';
    }
    for (const auto& p : r.measured_cdf) {
        out << "measured," << format_number(p.rsrp_dbm, 3) << ',' << format_number(p.cdf, 6) << '\n';
    }
}

nlohmann::json calibration_report(const CalibrationResult& r)
{
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
    nlohmann::json j;
    j["method"] = {{"loss", "squared_db_error"}, {"gradient", "central_finite_difference"}, {"optimizer", "adam"}};
    j["groups"] = nlohmann::json::array();
    for (std::size_t g = 0; g < r.groups.size(); ++g) {
        nlohmann::json jg{{"group", r.groups.names[g]}, {"frozen", static_cast<bool>(r.frozen[g])}};
        if (r.params[g]) {
            jg["eps_r"] = r.params[g]->eps_r;
            jg["sigma"] = r.params[g]->sigma;
            jg["scatter_s"] = r.params[g]->scatter_s;
        } else {
            jg["eps_r"] = nullptr;
        }
        j["groups"].push_back(std::move(jg));
    }
    j["regions"] = nlohmann::json::array();
    for (std::size_t i = 0; i < r.regions.size(); ++i) {
        const auto& reg = r.regions[i];
        nlohmann::json groups = nlohmann::json::array();
        for (int g : reg.groups) {
            groups.push_back(r.groups.names[static_cast<std::size_t>(g)]);
        }
        j["regions"].push_back({{"region", i},
                                {"center", {reg.center().x, reg.center().y}},
                                {"samples", reg.samples.size()},
                                {"measured_dbm", reg.avg_measured_dbm},
                                {"initial_dbm", i < r.initial_region_dbm.size() ? num(r.initial_region_dbm[i]) : nlohmann::json()},
                                {"final_dbm", i < r.final_region_dbm.size() ? num(r.final_region_dbm[i]) : nlohmann::json()},
                                {"cell", reg.cell},
                                {"groups", groups},
                                {"excluded", to_string(reg.excluded)}});
    }
    j["cells"] = nlohmann::json::array();
    for (const auto& c : r.cells) {
        nlohmann::json groups = nlohmann::json::array();
        for (int g : c.groups) {
            groups.push_back(r.groups.names[static_cast<std::size_t>(g)]);
        }
        j["cells"].push_back({{"cell", c.cell}, {"samples", c.sample_count}, {"regions", c.regions}, {"groups", groups},
                              {"restarts", c.restarts}});
    }
    j["warnings"] = r.warnings;
    return j;
}

} // namespace risplan
