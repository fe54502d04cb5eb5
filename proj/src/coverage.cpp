// SPDX-License-Identifier: Apache-2.0

#include "risplan/coverage.hpp"

#include "risplan/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

namespace risplan {

namespace {

std::string json_id(const nlohmann::json& j)
{
    if (j.is_string()) {
        return j.get<std::string>();
    }
    if (j.is_number_integer()) {
        return std::to_string(j.get<long long>());
    }
    throw ParseError("site id must be a string or an integer");
}

} // namespace

std::string format_number(double v, int precision)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    std::string s(buf);
    if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) {
        // Avoid "-0.000000" depending on rounding of tiny negatives.
        if (!s.empty() && s[0] == '-') {
            s.erase(0, 1);
        }
    }
    return s;
}

Network Network::from_json(const nlohmann::json& doc)
{
    try {
        Network net;
        for (const auto& js : doc.at("sites")) {
            Site site;
            site.id = json_id(js.at("id"));
            const auto& p = js.at("position");
            site.position = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
            if (js.contains("sectors")) {
                for (const auto& sec : js.at("sectors")) {
                    site.sectors.push_back({sec.at("bearing_deg").get<double>(), sec.value("tilt_deg", 0.0)});
                }
            } else {
                // Three sectors per site by default.
                site.sectors = {{0.0, 6.0}, {120.0, 6.0}, {240.0, 6.0}};
            }
            net.sites.push_back(std::move(site));
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("network JSON: ") + e.what());
    }
}

nlohmann::json Network::to_json() const
{
    nlohmann::json doc;
    doc["sites"] = nlohmann::json::array();
    for (const auto& s : sites) {
        nlohmann::json js;
        js["id"] = s.id;
        js["position"] = {s.position.x, s.position.y, s.position.z};
        js["sectors"] = nlohmann::json::array();
        for (const auto& sec : s.sectors) {
            js["sectors"].push_back({{"bearing_deg", sec.bearing_deg}, {"tilt_deg", sec.tilt_deg}});
        }
        doc["sites"].push_back(std::move(js));
    }
    return doc;
}

void Network::validate(const Scene& scene) const
{
    if (sites.empty()) {
        throw InvariantError("network has no sites");
    }
    for (const auto& s : sites) {
        if (s.sectors.empty()) {
            throw InvariantError("site '" + s.id + "' has no sectors");
        }
        if (!is_finite(s.position) || s.position.z < 0.0 || scene.is_indoor(s.position)) {
            throw InvariantError("site '" + s.id + "' must be outdoors and above ground");
        }
    }
}

SectorArray Network::sector_array(int bs, int sector, const SystemConfig& system) const
{
    const Site& s = sites.at(static_cast<std::size_t>(bs));
    const SectorPose& pose = s.sectors.at(static_cast<std::size_t>(sector));
    SectorArray a;
    a.position = s.position;
    a.bearing_deg = pose.bearing_deg;
    a.tilt_deg = pose.tilt_deg;
    a.m_h = system.m_h;
    a.m_v = system.m_v;
    return a;
}

std::size_t Network::sector_count() const
{
    std::size_t n = 0;
    for (const auto& s : sites) {
        n += s.sectors.size();
    }
    return n;
}

Network load_network(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open network file " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("network file " + path.string() + ": " + e.what());
    }
    return Network::from_json(doc);
}

std::size_t CoverageMap::outdoor_count() const
{
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const TileRecord& r) { return !r.indoor; }));
}

double rsrp(double gain, const SystemConfig& system)
{
    if (!(gain >= 0.0)) {
        throw PreconditionError("rsrp: gain must be >= 0");
    }
    if (gain == 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    return system.tx_power_subcarrier_dbm + linear_to_db(gain);
}

std::vector<double> SectorChannel::beam_gains(const Codebook& codebook) const
{
    std::vector<double> g = codebook.gains(h);
    for (std::size_t b = 0; b < g.size() && b < diffuse.size(); ++b) {
        g[b] += diffuse[b];
    }
    return g;
}

CoverageEngine::CoverageEngine(const Scene& scene, const Network& network, const SystemConfig& system,
                               const TraceConfig& cfg, const CoverageOptions& options)
    : scene_(scene), network_(network), system_(system), cfg_(cfg), options_(options),
      codebook_(system.m_h, system.m_v)
{
    system_.validate();
    cfg_.frequency = system_.frequency;
    cfg_.validate();
    network_.validate(scene_);
    if (options_.samples_per_tile != 1 && options_.samples_per_tile != 5) {
        throw InvariantError("samples_per_tile must be 1 or 5");
    }
    for (int bs = 0; bs < static_cast<int>(network_.sites.size()); ++bs) {
        std::vector<SectorArray> arrays;
        for (int s = 0; s < static_cast<int>(network_.sites[static_cast<std::size_t>(bs)].sectors.size()); ++s) {
            arrays.push_back(network_.sector_array(bs, s, system_));
        }
        arrays_.push_back(std::move(arrays));
        launches_.push_back(std::make_unique<RayLaunch>(scene_, network_.sites[static_cast<std::size_t>(bs)].position, cfg_));
        patches_.emplace_back();
        build_patches(bs);
    }
}

const SectorArray& CoverageEngine::sector(int bs, int sector) const
{
    return arrays_.at(static_cast<std::size_t>(bs)).at(static_cast<std::size_t>(sector));
}

void CoverageEngine::index_height(double z)
{
    for (auto& l : launches_) {
        l->build_index(z);
    }
}

void CoverageEngine::build_patches(int bs)
{
    if (options_.diffuse == DiffuseMode::Off) {
        return;
    }
    struct Acc {
        Vec3 point_sum;
        Vec3 dir_sum;
        Vec3 normal;
        double cos_sum = 0.0;
        double dist_sum = 0.0;
        std::size_t count = 0;
    };
    std::map<std::tuple<int, long, long>, Acc> cells;
    const double patch = options_.scatter_patch_m;
    const RayLaunch& launch = *launches_[static_cast<std::size_t>(bs)];
    for (const auto& h : launch.first_hits()) {
        const int m = scene_.face_material(h.face);
        if (m < 0) {
            continue;
        }
        if (options_.diffuse == DiffuseMode::ScatteringFaces &&
            !(scene_.materials()[static_cast<std::size_t>(m)].scatter_s > 0.0)) {
            continue;
        }
        long i1 = 0;
        long i2 = 0;
        if (h.face != scene_.ground_face() &&
            scene_.faces()[static_cast<std::size_t>(h.face)].kind == FaceKind::Wall) {
            const Face& f = scene_.faces()[static_cast<std::size_t>(h.face)];
            const Vec2 e = f.b - f.a;
            const double u = dot(Vec2{h.point.x, h.point.y} - f.a, e) / norm(e);
            i1 = static_cast<long>(std::floor(u / patch));
            i2 = static_cast<long>(std::floor(h.point.z / patch));
        } else {
            i1 = static_cast<long>(std::floor(h.point.x / patch));
            i2 = static_cast<long>(std::floor(h.point.y / patch));
        }
        Acc& a = cells[{h.face, i1, i2}];
        a.point_sum += h.point;
        a.dir_sum += h.direction;
        a.normal = h.normal;
        a.cos_sum += std::abs(dot(h.direction, h.normal));
        a.dist_sum += h.distance;
        ++a.count;
    }
    auto& out = patches_[static_cast<std::size_t>(bs)];
    for (const auto& [key, a] : cells) {
        const double n = static_cast<double>(a.count);
        DiffusePatch p;
        p.center = a.point_sum / n;
        p.normal = a.normal;
        p.departure = normalized(a.dir_sum);
        p.solid_angle = n * launch.solid_angle();
        p.cos_incidence = std::clamp(a.cos_sum / n, 1e-6, 1.0);
        p.face = std::get<0>(key);
        p.distance = a.dist_sum / n;
        out.push_back(p);
    }
}

LinkGeometry CoverageEngine::geometry(int bs, const Vec3& rx) const
{
    LinkGeometry g;
    const RayLaunch& launch = *launches_[static_cast<std::size_t>(bs)];
    const Vec3& tx = launch.origin();
    if (distance(tx, rx) > 0.0 && scene_.los_visible(tx, rx)) {
        g.specular.push_back(los_path(tx, rx));
    }
    for (const auto& seq : launch.captured(rx)) {
        if (auto p = refine_specular(scene_, tx, rx, seq)) {
            g.specular.push_back(std::move(*p));
        }
    }
    for (const auto& patch : patches_[static_cast<std::size_t>(bs)]) {
        if (dot(rx - patch.center, patch.normal) > 1e-9 && scene_.los_visible(patch.center, rx)) {
            g.diffuse.push_back(&patch);
        }
    }
    return g;
}

std::vector<std::vector<SectorChannel>> CoverageEngine::channels(const Vec3& rx, const Scene* materials) const
{
    std::vector<LinkGeometry> geo;
    for (int bs = 0; bs < static_cast<int>(launches_.size()); ++bs) {
        geo.push_back(geometry(bs, rx));
    }
    return channels(geo, rx, materials);
}

std::vector<std::vector<SectorChannel>> CoverageEngine::channels(const std::vector<LinkGeometry>& geometry,
                                                                 const Vec3& rx, const Scene* materials) const
{
    const Scene& mat = materials ? *materials : scene_;
    const double f = system_.frequency;
    const double lambda = wavelength(f);
    std::vector<std::vector<SectorChannel>> out(geometry.size());
    for (std::size_t bs = 0; bs < geometry.size(); ++bs) {
        const LinkGeometry& g = geometry[bs];
        std::vector<cplx> amps;
        amps.reserve(g.specular.size());
        for (const auto& p : g.specular) {
            RayPath copy = p;
            rebind_materials(copy, mat);
            amps.push_back(path_amplitude(copy, f, mat.materials()));
        }
        // Diffuse patch power gains, independent of the sector.
        std::vector<double> diffuse_gain;
        for (const DiffusePatch* patch : g.diffuse) {
            const Material& m = mat.materials()[static_cast<std::size_t>(mat.face_material(patch->face))];
            const Vec3 out_vec = rx - patch->center;
            const double d2 = norm(out_vec);
            const double cos_s = dot(out_vec, patch->normal) / d2;
            const double total = patch->distance + d2;
            const double lobe2 = std::min(1.0, (total / d2) * (total / d2) * patch->solid_angle * cos_s / kPi);
            const cplx gamma =
                fresnel_coefficient(m, f, patch->cos_incidence, polarization_for_normal(patch->normal));
            const double fs = lambda / (4.0 * kPi * total);
            diffuse_gain.push_back(fs * fs * lobe2 * m.scatter_s * std::norm(gamma));
        }
        const auto& arrays = arrays_[bs];
        out[bs].resize(arrays.size());
        for (std::size_t s = 0; s < arrays.size(); ++s) {
            SectorChannel& ch = out[bs][s];
            ch.h.assign(static_cast<std::size_t>(arrays[s].size()), cplx{});
            for (std::size_t i = 0; i < g.specular.size(); ++i) {
                accumulate_path(ch.h, arrays[s], g.specular[i].departure_dir, amps[i]);
            }
            ch.diffuse.assign(static_cast<std::size_t>(codebook_.size()), 0.0);
            for (std::size_t i = 0; i < g.diffuse.size(); ++i) {
                if (!(diffuse_gain[i] > 0.0)) {
                    continue;
                }
                std::vector<cplx> a(static_cast<std::size_t>(arrays[s].size()), cplx{});
                accumulate_path(a, arrays[s], g.diffuse[i]->departure, 1.0);
                const auto per_beam = codebook_.gains(a);
                for (std::size_t b = 0; b < per_beam.size(); ++b) {
                    ch.diffuse[b] += diffuse_gain[i] * per_beam[b];
                }
            }
        }
    }
    return out;
}

std::vector<Vec3> CoverageEngine::tile_samples(const Vec3& c, double tile_size) const
{
    if (!(tile_size > 0.0) || options_.samples_per_tile == 1) {
        return {c};
    }
    const double q = tile_size / 4.0;
    return {c, c + Vec3{q, 0, 0}, c + Vec3{-q, 0, 0}, c + Vec3{0, q, 0}, c + Vec3{0, -q, 0}};
}

std::vector<std::vector<std::vector<double>>> CoverageEngine::gains(const Vec3& rx, double tile_size,
                                                                    const Scene* materials) const
{
    std::vector<std::vector<std::vector<double>>> acc(arrays_.size());
    for (std::size_t bs = 0; bs < arrays_.size(); ++bs) {
        acc[bs].assign(arrays_[bs].size(), std::vector<double>(static_cast<std::size_t>(codebook_.size()), 0.0));
    }
    int used = 0;
    for (const Vec3& p : tile_samples(rx, tile_size)) {
        if (p.z < 0.0 || scene_.is_indoor(p)) {
            continue;
        }
        ++used;
        const auto ch = channels(p, materials);
        for (std::size_t bs = 0; bs < ch.size(); ++bs) {
            for (std::size_t s = 0; s < ch[bs].size(); ++s) {
                const auto g = ch[bs][s].beam_gains(codebook_);
                for (std::size_t b = 0; b < g.size(); ++b) {
                    acc[bs][s][b] += g[b];
                }
            }
        }
    }
    if (used > 1) {
        for (auto& per_bs : acc) {
            for (auto& per_sector : per_bs) {
                for (auto& v : per_sector) {
                    v /= used;
                }
            }
        }
    }
    return acc;
}

BestServer pick_best(const std::vector<std::vector<std::vector<double>>>& gains, const SystemConfig& system)
{
    BestServer best;
    for (std::size_t bs = 0; bs < gains.size(); ++bs) {
        for (std::size_t s = 0; s < gains[bs].size(); ++s) {
            for (std::size_t b = 0; b < gains[bs][s].size(); ++b) {
                const double g = gains[bs][s][b];
                if (!best.serving.valid() || g > best.gain) {
                    best.serving = {static_cast<int>(bs), static_cast<int>(s), static_cast<int>(b)};
                    best.gain = g;
                }
            }
        }
    }
    best.rsrp_dbm = rsrp(best.gain, system);
    if (best.gain == 0.0) {
        best.serving = {};
    }
    return best;
}

BestServer CoverageEngine::best_server(const Vec3& rx, double tile_size, const Scene* materials) const
{
    return pick_best(gains(rx, tile_size, materials), system_);
}

CoverageMap CoverageEngine::coverage_map(const TileGrid& grid) const
{
    grid.validate();
    CoverageMap map;
    map.grid = grid;
    map.system = system_;
    map.threshold_dbm = options_.threshold_dbm;
    map.samples_per_tile = options_.samples_per_tile;
    map.records.resize(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        TileRecord& r = map.records[i];
        r.row = grid.row_of(i);
        r.col = grid.col_of(i);
        r.center = grid.center(i);
        if (scene_.is_indoor(r.center)) {
            r.indoor = true;
            r.rsrp_dbm = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        const BestServer best = best_server(r.center, grid.tile_size);
        r.best_bs = best.serving.bs;
        r.best_sector = best.serving.sector;
        r.best_beam = best.serving.beam;
        r.rsrp_dbm = best.rsrp_dbm;
        r.in_outage = r.rsrp_dbm < map.threshold_dbm;
    });
    return map;
}

double tile_gain(const Scene& scene, const SectorArray& array, int beam, const TileGrid& grid, std::size_t tile,
                 const TraceConfig& cfg, int samples_per_tile)
{
    Network net;
    net.sites.push_back({"tx", array.position, {{array.bearing_deg, array.tilt_deg}}});
    SystemConfig sys{"custom", cfg.frequency, 0.0, array.m_h, array.m_v, 0.0, 0.0, 0};
    CoverageOptions opt;
    opt.samples_per_tile = samples_per_tile;
    CoverageEngine engine(scene, net, sys, cfg, opt);
    if (tile >= grid.size()) {
        throw PreconditionError("tile_gain: tile outside the grid");
    }
    engine.index_height(grid.ue_height);
    const auto g = engine.gains(grid.center(tile), grid.tile_size);
    return g.at(0).at(0).at(static_cast<std::size_t>(beam));
}

CoverageMap coverage_map(const Scene& scene, const Network& network, const SystemConfig& system,
                         const TileGrid& grid, const TraceConfig& cfg, const CoverageOptions& options)
{
    CoverageEngine engine(scene, network, system, cfg, options);
    engine.index_height(grid.ue_height);
    return engine.coverage_map(grid);
}

std::vector<std::size_t> outage_set(const CoverageMap& map, double threshold_dbm)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < map.records.size(); ++i) {
        const TileRecord& r = map.records[i];
        if (!r.indoor && r.rsrp_dbm < threshold_dbm) {
            out.push_back(i);
        }
    }
    return out;
}

RsrpCdf rsrp_cdf(const CoverageMap& map)
{
    std::vector<double> values;
    std::size_t outdoor = 0;
    std::size_t no_signal = 0;
    for (const auto& r : map.records) {
        if (r.indoor) {
            continue;
        }
        ++outdoor;
        if (std::isfinite(r.rsrp_dbm)) {
            values.push_back(r.rsrp_dbm);
        } else {
            ++no_signal;
        }
    }
    RsrpCdf cdf;
    cdf.no_signal_fraction = outdoor ? static_cast<double>(no_signal) / static_cast<double>(outdoor) : 0.0;
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i + 1 < values.size() && values[i + 1] == values[i]) {
            continue;
        }
        cdf.points.push_back({values[i], static_cast<double>(i + 1) / n});
    }
    return cdf;
}

void write_coverage_csv(const CoverageMap& map, std::ostream& out)
{
    out << "row,col,x,y,rsrp_dbm,bs,sector,beam,outage\n";
    for (const auto& r : map.records) {
        out << r.row << ',' << r.col << ',' << format_number(r.center.x, 3) << ',' << format_number(r.center.y, 3)
            << ',' << format_number(r.rsrp_dbm, 4) << ',' << r.best_bs << ',' << r.best_sector << ',' << r.best_beam
            << ',' << (r.in_outage ? 1 : 0) << '\n';
    }
}

void write_cdf_csv(const RsrpCdf& cdf, std::ostream& out)
{
    out << "rsrp_dbm,cdf\n";
    for (const auto& p : cdf.points) {
        out << format_number(p.rsrp_dbm, 4) << ',' << format_number(p.cdf, 6) << '\n';
    }
}

} // namespace risplan
