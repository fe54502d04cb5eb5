// SPDX-License-Identifier: Apache-2.0

#include "risplan/placement.hpp"

#include "risplan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <unordered_map>

namespace risplan {

namespace {

// Keeps the first candidate of every group closer than `tol` (input order).
std::vector<Candidate> dedup(std::vector<Candidate> in, double tol)
{
    std::unordered_map<long long, std::vector<std::size_t>> cells;
    auto key = [](long long x, long long y, long long z) { return (x * 73856093) ^ (y * 19349663) ^ (z * 83492791); };
    std::vector<Candidate> out;
    for (auto& c : in) {
        const long long cx = static_cast<long long>(std::floor(c.location.x / tol));
        const long long cy = static_cast<long long>(std::floor(c.location.y / tol));
        const long long cz = static_cast<long long>(std::floor(c.location.z / tol));
        bool dup = false;
        for (long long dx = -1; dx <= 1 && !dup; ++dx) {
            for (long long dy = -1; dy <= 1 && !dup; ++dy) {
                for (long long dz = -1; dz <= 1 && !dup; ++dz) {
                    auto it = cells.find(key(cx + dx, cy + dy, cz + dz));
                    if (it == cells.end()) {
                        continue;
                    }
                    for (std::size_t k : it->second) {
                        if (distance(out[k].location, c.location) < tol) {
                            dup = true;
                            break;
                        }
                    }
                }
            }
        }
        if (!dup) {
            cells[key(cx, cy, cz)].push_back(out.size());
            out.push_back(std::move(c));
        }
    }
    return out;
}

void sort_by_distance(std::vector<Candidate>& c)
{
    std::stable_sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
        return a.distance_to_centroid_3d < b.distance_to_centroid_3d;
    });
}

bool better(const ClusterOutcome& a, const ClusterOutcome& b)
{
    const bool ea = a.status == OutcomeStatus::RisEffective;
    const bool eb = b.status == OutcomeStatus::RisEffective;
    if (ea != eb) {
        return ea;
    }
    return a.improved_fraction > b.improved_fraction;
}

} // namespace

const char* to_string(CandidateSource s)
{
    switch (s) {
    case CandidateSource::StrongestRayBounce:
        return "strongest_ray_bounce";
    case CandidateSource::FirstBounce:
        return "first_bounce";
    case CandidateSource::SecondBounce:
        return "second_bounce";
    case CandidateSource::ScatterPoint:
        return "scatter_point";
    }
    return "?";
}

const char* to_string(Strategy s) { return s == Strategy::Reflection ? "reflection" : "scattering"; }

const char* to_string(OutcomeStatus s)
{
    switch (s) {
    case OutcomeStatus::RisEffective:
        return "ris_effective";
    case OutcomeStatus::Deferred:
        return "deferred";
    case OutcomeStatus::Reassociated:
        return "reassociated";
    case OutcomeStatus::Unserved:
        return "unserved";
    }
    return "?";
}

Strategy parse_strategy(std::string_view s)
{
    if (s == "reflection") {
        return Strategy::Reflection;
    }
    if (s == "scattering") {
        return Strategy::Scattering;
    }
    throw InvariantError("unknown strategy '" + std::string(s) + "' (expected reflection or scattering)");
}

void PipelineConfig::validate() const
{
    if (!(t1 > 0.0) || !(t2 > 0.0)) {
        throw InvariantError("clustering thresholds must be > 0");
    }
    if (!(effective_fraction >= 0.0 && effective_fraction < 1.0)) {
        throw InvariantError("effective_fraction must be in [0, 1)");
    }
    if (!(ris_width > 0.0) || !(ris_height > 0.0)) {
        throw InvariantError("RIS width and height must be > 0");
    }
    if (!(eta >= 0.0 && eta <= 1.0) || !(r > 0.0 && r <= 1.0)) {
        throw InvariantError("RIS eta must be in [0, 1] and r in (0, 1]");
    }
    if (!(nearby_range_m >= 0.0) || max_candidate_evals < 1 || !(dedup_m > 0.0) || scatter_ray_factor < 1) {
        throw InvariantError("invalid pipeline limits");
    }
}

double PipelineResult::fraction(const std::set<std::size_t>& s) const
{
    return outage_tiles.empty() ? 0.0 : static_cast<double>(s.size()) / static_cast<double>(outage_tiles.size());
}

std::vector<Cluster> cluster_tiles(const TileGrid& grid, std::span<const std::size_t> tiles, double threshold_t,
                                   int first_id)
{
    std::vector<Vec2> pts;
    pts.reserve(tiles.size());
    for (std::size_t t : tiles) {
        const Vec3 c = grid.center(t);
        pts.push_back({c.x, c.y});
    }
    auto clusters = birch_cluster(pts, threshold_t);
    for (auto& c : clusters) {
        c.id += first_id;
        for (auto& m : c.members) {
            m = tiles[m];
        }
    }
    return clusters;
}

RisPlanner::RisPlanner(const CoverageEngine& engine, const CoverageMap& baseline, const PipelineConfig& cfg)
    : engine_(engine), baseline_(baseline), cfg_(cfg)
{
    cfg_.validate();
    if (baseline_.records.size() != baseline_.grid.size()) {
        throw PreconditionError("baseline coverage map is incomplete");
    }
}

std::vector<RayPath> RisPlanner::specular_paths(int bs, const Vec3& rx) const
{
    auto paths = engine_.geometry(bs, rx).specular;
    const double f = engine_.system().frequency;
    for (auto& p : paths) {
        p.amplitude = path_amplitude(p, f, engine_.scene().materials());
    }
    return paths;
}

std::vector<Candidate> RisPlanner::strongest_ray_candidates(const Vec3& centroid, bool* no_rays) const
{
    const RayPath* best = nullptr;
    int best_bs = -1;
    int best_id = -1;
    std::vector<std::vector<RayPath>> all;
    if (!engine_.scene().is_indoor(centroid)) {
        for (int bs = 0; bs < static_cast<int>(engine_.network().sites.size()); ++bs) {
            all.push_back(specular_paths(bs, centroid));
        }
    }
    for (std::size_t bs = 0; bs < all.size(); ++bs) {
        for (std::size_t i = 0; i < all[bs].size(); ++i) {
            const RayPath& p = all[bs][i];
            if (!best || p.power() > best->power()) {
                best = &p;
                best_bs = static_cast<int>(bs);
                best_id = static_cast<int>(i);
            }
        }
    }
    if (no_rays) {
        *no_rays = best == nullptr;
    }
    std::vector<Candidate> out;
    if (!best) {
        return out;
    }
    for (const auto& it : best->interactions) {
        if (it.kind == InteractionKind::SpecularReflection) {
            out.push_back({it.point, CandidateSource::StrongestRayBounce, best_id, best_bs, distance(it.point, centroid)});
        }
    }
    return out;
}

std::vector<Candidate> RisPlanner::all_ray_candidates(const Vec3& centroid) const
{
    std::vector<Candidate> out;
    if (engine_.scene().is_indoor(centroid)) {
        return out;
    }
    for (int bs = 0; bs < static_cast<int>(engine_.network().sites.size()); ++bs) {
        const auto paths = specular_paths(bs, centroid);
        for (std::size_t i = 0; i < paths.size(); ++i) {
            const auto& its = paths[i].interactions;
            for (std::size_t k = 1; k + 1 < its.size() && k <= 2; ++k) {
                if (its[k].kind != InteractionKind::SpecularReflection) {
                    continue;
                }
                out.push_back({its[k].point, k == 1 ? CandidateSource::FirstBounce : CandidateSource::SecondBounce,
                               static_cast<int>(i), bs, distance(its[k].point, centroid)});
            }
        }
    }
    sort_by_distance(out);
    return dedup(std::move(out), cfg_.dedup_m);
}

const RayLaunch& RisPlanner::scatter_launch(int bs) const
{
    std::call_once(scatter_once_, [this] {
        TraceConfig c = engine_.trace_config();
        c.ray_count *= static_cast<std::size_t>(cfg_.scatter_ray_factor);
        c.max_bounces = 1;
        for (const auto& site : engine_.network().sites) {
            scatter_launches_.push_back(std::make_unique<RayLaunch>(engine_.scene(), site.position, c));
        }
    });
    return *scatter_launches_.at(static_cast<std::size_t>(bs));
}

std::vector<Candidate> RisPlanner::scattering_candidates(const Vec3& centroid) const
{
    std::vector<Candidate> out;
    const Scene& scene = engine_.scene();
    if (scene.is_indoor(centroid)) {
        return out;
    }
    for (int bs = 0; bs < static_cast<int>(engine_.network().sites.size()); ++bs) {
        for (const auto& h : scatter_launch(bs).first_hits()) {
            const int m = scene.face_material(h.face);
            if (m < 0 || !(scene.materials()[static_cast<std::size_t>(m)].scatter_s > 0.0)) {
                continue;
            }
            if (dot(centroid - h.point, h.normal) <= 0.0 || !scene.los_visible(h.point, centroid)) {
                continue;
            }
            out.push_back({h.point, CandidateSource::ScatterPoint, static_cast<int>(h.ray), bs,
                           distance(h.point, centroid)});
        }
    }
    sort_by_distance(out);
    return dedup(std::move(out), cfg_.dedup_m);
}

std::optional<RisUnit> RisPlanner::mount(const Candidate& c) const
{
    const Scene& scene = engine_.scene();
    FacadePoint fp;
    try {
        fp = scene.snap_to_facade(c.location);
    } catch (const InvalidCandidate&) {
        return std::nullopt;
    }
    Vec3 center = fp.center;
    // Keep the aperture above ground and, where it fits, below the roof line.
    const double half = cfg_.ris_height / 2;
    const double roof = scene.buildings()[static_cast<std::size_t>(fp.building)].height;
    if (roof >= cfg_.ris_height) {
        center.z = std::clamp(center.z, half, roof - half);
    } else {
        center.z = std::max(center.z, half);
    }
    return RisUnit::make(center, fp.outward_normal, cfg_.ris_width, cfg_.ris_height, engine_.system().frequency,
                         cfg_.eta, cfg_.r);
}

ServingTriple RisPlanner::bs_beam_for_ris(const RisUnit& unit) const
{
    const BestServer best = engine_.best_server(ris_probe_point(unit));
    if (!best.serving.valid()) {
        throw InvalidCandidate("no sector reaches the RIS");
    }
    return best.serving;
}

std::optional<RisDeployment> RisPlanner::deploy(const RisUnit& unit) const
{
    ServingTriple serving;
    try {
        serving = bs_beam_for_ris(unit);
    } catch (const InvalidCandidate&) {
        return std::nullopt;
    }
    const Vec3 probe = ris_probe_point(unit);
    const auto paths = specular_paths(serving.bs, probe);
    const auto illum = strongest_illumination(paths, probe, engine_.system().frequency);
    if (!illum || !(dot(illum->virtual_source - unit.center, unit.outward_normal) > 0.0)) {
        return std::nullopt;
    }
    RisDeployment dep;
    dep.unit = unit;
    dep.serving_bs = serving.bs;
    dep.serving_sector = serving.sector;
    dep.serving_beam = serving.beam;
    dep.illumination = *illum;
    return dep;
}

double RisPlanner::baseline_rsrp_at(const Vec3& p) const
{
    return engine_.best_server(p, baseline_.grid.tile_size).rsrp_dbm;
}

double RisPlanner::rsrp_with_ris(const RisDeployment& dep, const Vec3& p, const Vec3& target,
                                 std::optional<double> baseline_dbm) const
{
    const double base = baseline_dbm ? *baseline_dbm : baseline_rsrp_at(p);
    const RisUnit& u = dep.unit;
    if (!(dot(target - u.center, u.outward_normal) > 0.0)) {
        return base;
    }
    const double f = engine_.system().frequency;
    const RisUnit steered = u.with_phase(steer_toward(u, dep.illumination, target, f));
    const auto gamma = steered.gammas();
    const Scene& scene = engine_.scene();
    const std::size_t bs = static_cast<std::size_t>(dep.serving_bs);
    std::vector<std::vector<std::vector<double>>> acc;
    int used = 0;
    for (const Vec3& q : engine_.tile_samples(p, baseline_.grid.tile_size)) {
        if (q.z < 0.0 || scene.is_indoor(q)) {
            continue;
        }
        auto ch = engine_.channels(q);
        if (ris_sees(scene, steered, q)) {
            const cplx field = reradiated_field(steered, gamma, dep.illumination.virtual_source, q, f);
            const cplx coeff = dep.illumination.coefficient * field * (wavelength(f) / (4.0 * kPi));
            for (std::size_t s = 0; s < ch[bs].size(); ++s) {
                accumulate_path(ch[bs][s].h, engine_.sector(static_cast<int>(bs), static_cast<int>(s)),
                                dep.illumination.departure, coeff);
            }
        }
        if (acc.empty()) {
            acc.resize(ch.size());
            for (std::size_t b = 0; b < ch.size(); ++b) {
                acc[b].assign(ch[b].size(), std::vector<double>(static_cast<std::size_t>(engine_.codebook().size()), 0.0));
            }
        }
        for (std::size_t b = 0; b < ch.size(); ++b) {
            for (std::size_t s = 0; s < ch[b].size(); ++s) {
                const auto g = ch[b][s].beam_gains(engine_.codebook());
                for (std::size_t k = 0; k < g.size(); ++k) {
                    acc[b][s][k] += g[k];
                }
            }
        }
        ++used;
    }
    if (used == 0) {
        return base;
    }
    for (auto& per_bs : acc) {
        for (auto& per_sector : per_bs) {
            for (auto& v : per_sector) {
                v /= used;
            }
        }
    }
    // The RIS can always be steered away, so the RIS-free server remains available.
    return std::max(base, pick_best(acc, engine_.system()).rsrp_dbm);
}

double RisPlanner::tile_rsrp_with_ris(const RisDeployment& dep, std::size_t tile) const
{
    const Vec3 c = baseline_.grid.center(tile);
    return rsrp_with_ris(dep, c, c, baseline_.records.at(tile).rsrp_dbm);
}

Vec3 RisPlanner::evaluation_point(const Cluster& c) const
{
    const Vec3 centroid = cluster_centroid(c, baseline_.grid.ue_height);
    if (!engine_.scene().is_indoor(centroid) || c.members.empty()) {
        return centroid;
    }
    Vec3 best = baseline_.grid.center(c.members.front());
    for (std::size_t t : c.members) {
        const Vec3 p = baseline_.grid.center(t);
        if (distance(p, centroid) < distance(best, centroid)) {
            best = p;
        }
    }
    return best;
}

namespace {

struct Trial {
    std::optional<RisDeployment> dep;
    double base = -std::numeric_limits<double>::infinity();
    double ris = -std::numeric_limits<double>::infinity();
    bool improved() const { return dep && ris > base; }
};

} // namespace

ClusterOutcome RisPlanner::evaluate_candidate(const Cluster& cluster, const Candidate& cand) const
{
    ClusterOutcome out;
    out.cluster_id = cluster.id;
    out.candidate = cand;
    out.status = OutcomeStatus::Deferred;
    out.candidates_evaluated = 1;
    out.deferred_tiles = cluster.members;

    const Vec3 c = evaluation_point(cluster);
    out.centroid_baseline_dbm = baseline_rsrp_at(c);
    const auto unit = mount(cand);
    if (!unit) {
        return out;
    }
    auto dep = deploy(*unit);
    if (!dep) {
        return out;
    }
    out.centroid_ris_dbm = rsrp_with_ris(*dep, c, c, out.centroid_baseline_dbm);
    out.centroid_improved = out.centroid_ris_dbm > out.centroid_baseline_dbm;
    if (!out.centroid_improved) {
        return out;
    }
    // Per-UE reconfiguration: the RIS is steered toward each tile in turn.
    out.deferred_tiles.clear();
    for (std::size_t t : cluster.members) {
        const double base = baseline_.records.at(t).rsrp_dbm;
        const double with = tile_rsrp_with_ris(*dep, t);
        if (with > base) {
            out.improved_tiles.push_back(t);
            dep->ue_targets[t] = baseline_.grid.center(t);
            if (base < cfg_.threshold_dbm && with >= cfg_.threshold_dbm) {
                out.recovered_tiles.push_back(t);
            }
        } else {
            out.deferred_tiles.push_back(t);
        }
    }
    out.improved_fraction = cluster.members.empty() ? 0.0
                                                    : static_cast<double>(out.improved_tiles.size()) /
                                                          static_cast<double>(cluster.members.size());
    if (out.improved_fraction > cfg_.effective_fraction) {
        out.status = OutcomeStatus::RisEffective;
        dep->target_cluster_id = cluster.id;
        out.deployment = std::move(dep);
    } else {
        out.recovered_tiles.clear();
    }
    return out;
}

ClusterOutcome RisPlanner::place_for_cluster(const Cluster& cluster) const
{
    const Vec3 c = evaluation_point(cluster);
    const double base = baseline_rsrp_at(c);
    int evaluated = 0;
    std::vector<Candidate> tested;

    auto trial = [&](const Candidate& cand) {
        Trial t;
        t.base = base;
        ++evaluated;
        tested.push_back(cand);
        if (const auto unit = mount(cand)) {
            t.dep = deploy(*unit);
            if (t.dep) {
                t.ris = rsrp_with_ris(*t.dep, c, c, base);
            }
        }
        return t;
    };

    std::optional<ClusterOutcome> best;
    auto consider = [&](ClusterOutcome o) {
        if (!best || better(o, *best)) {
            best = std::move(o);
        }
    };

    bool no_rays = false;
    if (cfg_.strategy == Strategy::Reflection) {
        // Strongest ray: every bounce point, keep the one with the best centroid RSRP.
        const auto strongest = strongest_ray_candidates(c, &no_rays);
        std::optional<Candidate> pick;
        double pick_rsrp = -std::numeric_limits<double>::infinity();
        for (const auto& cand : strongest) {
            const Trial t = trial(cand);
            if (t.improved() && t.ris > pick_rsrp) {
                pick_rsrp = t.ris;
                pick = cand;
            }
        }
        if (pick) {
            ClusterOutcome o = evaluate_candidate(cluster, *pick);
            if (o.status == OutcomeStatus::RisEffective) {
                o.candidates_evaluated = evaluated;
                return o;
            }
            consider(std::move(o));
        }
        // All rays: first and second bounces in distance order, first centroid improvement wins.
        for (const auto& cand : all_ray_candidates(c)) {
            if (evaluated >= cfg_.max_candidate_evals + static_cast<int>(strongest.size())) {
                break;
            }
            const bool seen = std::any_of(tested.begin(), tested.end(), [&](const Candidate& t) {
                return distance(t.location, cand.location) < cfg_.dedup_m;
            });
            if (seen) {
                continue;
            }
            if (trial(cand).improved()) {
                consider(evaluate_candidate(cluster, cand));
                break;
            }
        }
    } else {
        for (const auto& cand : scattering_candidates(c)) {
            if (evaluated >= cfg_.max_candidate_evals) {
                break;
            }
            if (trial(cand).improved()) {
                consider(evaluate_candidate(cluster, cand));
                break;
            }
        }
    }

    ClusterOutcome out;
    if (best) {
        out = std::move(*best);
    } else {
        out.cluster_id = cluster.id;
        out.status = OutcomeStatus::Unserved;
        out.deferred_tiles = cluster.members;
        out.centroid_baseline_dbm = base;
    }
    out.no_rays = no_rays;
    out.candidates_evaluated = evaluated;
    return out;
}

std::vector<Reassignment> RisPlanner::reassociate(std::span<const std::size_t> tiles,
                                                  std::span<const RisDeployment> deployments) const
{
    const Scene& scene = engine_.scene();
    const auto& sites = engine_.network().sites;
    // Step 2 does not depend on the tile: BSs with LoS to each RIS.
    std::vector<std::vector<int>> feeders(deployments.size());
    for (std::size_t d = 0; d < deployments.size(); ++d) {
        const Vec3 probe = ris_probe_point(deployments[d].unit);
        for (int bs = 0; bs < static_cast<int>(sites.size()); ++bs) {
            if (scene.los_visible(sites[static_cast<std::size_t>(bs)].position, probe)) {
                feeders[d].push_back(bs);
            }
        }
    }
    std::vector<std::optional<Reassignment>> slots(tiles.size());
    parallel_for(tiles.size(), [&](std::size_t i) {
        const std::size_t tile = tiles[i];
        const Vec3 p = baseline_.grid.center(tile);
        int pick = -1;
        for (std::size_t d = 0; d < deployments.size(); ++d) {
            if (feeders[d].empty() || !ris_sees(scene, deployments[d].unit, p)) {
                continue;
            }
            if (pick < 0 || distance(deployments[d].unit.center, p) <
                                distance(deployments[static_cast<std::size_t>(pick)].unit.center, p)) {
                pick = static_cast<int>(d);
            }
        }
        if (pick < 0) {
            return;
        }
        const RisDeployment& chosen = deployments[static_cast<std::size_t>(pick)];
        int bs = -1;
        for (int b : feeders[static_cast<std::size_t>(pick)]) {
            if (bs < 0 || distance(sites[static_cast<std::size_t>(b)].position, chosen.unit.center) <
                              distance(sites[static_cast<std::size_t>(bs)].position, chosen.unit.center)) {
                bs = b;
            }
        }
        RisDeployment via = chosen;
        via.serving_bs = bs;
        const Vec3 probe = ris_probe_point(chosen.unit);
        const auto illum = strongest_illumination(specular_paths(bs, probe), probe, engine_.system().frequency);
        if (!illum) {
            return;
        }
        via.illumination = *illum;
        const double base = baseline_.records.at(tile).rsrp_dbm;
        const double with = tile_rsrp_with_ris(via, tile);
        if (with > base) {
            slots[i] = Reassignment{tile, pick, bs, with, base < cfg_.threshold_dbm && with >= cfg_.threshold_dbm};
        }
    });
    std::vector<Reassignment> out;
    for (auto& s : slots) {
        if (s) {
            out.push_back(*s);
        }
    }
    return out;
}

std::set<std::size_t> RisPlanner::extend_nearby(std::span<const RisDeployment> deployments,
                                                std::span<const std::size_t> outage_tiles,
                                                const std::set<std::size_t>& recovered) const
{
    std::vector<std::size_t> open;
    for (std::size_t t : outage_tiles) {
        if (!recovered.count(t)) {
            open.push_back(t);
        }
    }
    std::vector<char> hit(open.size(), 0);
    parallel_for(open.size(), [&](std::size_t i) {
        const Vec3 p = baseline_.grid.center(open[i]);
        for (const auto& dep : deployments) {
            const Vec3 d = p - dep.unit.center;
            if (std::hypot(d.x, d.y) > cfg_.nearby_range_m || !ris_sees(engine_.scene(), dep.unit, p)) {
                continue;
            }
            if (tile_rsrp_with_ris(dep, open[i]) >= cfg_.threshold_dbm) {
                hit[i] = 1;
                return;
            }
        }
    });
    std::set<std::size_t> out = recovered;
    for (std::size_t i = 0; i < open.size(); ++i) {
        if (hit[i]) {
            out.insert(open[i]);
        }
    }
    return out;
}

PipelineResult RisPlanner::run() const
{
    PipelineResult res;
    res.outage_tiles = outage_set(baseline_, cfg_.threshold_dbm);
    if (res.outage_tiles.empty()) {
        res.topn_curve = {{0, 0.0}};
        return res;
    }

    auto run_stage = [&](std::span<const std::size_t> tiles, double t, int stage) {
        auto clusters = cluster_tiles(baseline_.grid, tiles, t, static_cast<int>(res.clusters.size()));
        std::vector<ClusterOutcome> outcomes(clusters.size());
        parallel_for(clusters.size(), [&](std::size_t i) { outcomes[i] = place_for_cluster(clusters[i]); });
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            outcomes[i].stage = stage;
            if (outcomes[i].status == OutcomeStatus::RisEffective) {
                RisDeployment& dep = *outcomes[i].deployment;
                dep.ris_id = "ris" + std::to_string(res.deployments.size());
                res.deployments.push_back(dep);
            }
            res.clusters.push_back(std::move(clusters[i]));
            res.outcomes.push_back(std::move(outcomes[i]));
        }
    };
    auto recovered_so_far = [&] {
        std::set<std::size_t> s;
        for (const auto& o : res.outcomes) {
            s.insert(o.recovered_tiles.begin(), o.recovered_tiles.end());
        }
        return s;
    };
    auto leftovers = [&](const std::set<std::size_t>& rec) {
        std::vector<std::size_t> left;
        for (std::size_t t : res.outage_tiles) {
            if (!rec.count(t)) {
                left.push_back(t);
            }
        }
        return left;
    };

    run_stage(res.outage_tiles, cfg_.t1, 1);
    res.recovered_placement = recovered_so_far();

    const auto left2 = leftovers(res.recovered_placement);
    if (cfg_.recluster && !left2.empty()) {
        run_stage(left2, cfg_.t2, 2);
    }
    res.recovered_recluster = recovered_so_far();

    res.recovered_reassociate = res.recovered_recluster;
    const auto left3 = leftovers(res.recovered_recluster);
    if (cfg_.reassociate && !left3.empty() && !res.deployments.empty()) {
        res.reassignments = reassociate(left3, res.deployments);
        for (const auto& r : res.reassignments) {
            if (r.recovered) {
                res.recovered_reassociate.insert(r.tile);
            }
        }
    }
    res.topn_curve = prioritize_topn(res.clusters, res.outcomes, res.reassignments, res.outage_tiles.size());
    return res;
}

namespace {

std::vector<std::size_t> size_order(std::span<const Cluster> clusters)
{
    std::vector<std::size_t> order(clusters.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (clusters[a].cf.count != clusters[b].cf.count) {
            return clusters[a].cf.count > clusters[b].cf.count;
        }
        return clusters[a].id < clusters[b].id;
    });
    return order;
}

// Deployment index (in pipeline order) of each effective outcome.
std::vector<int> deployment_index(std::span<const ClusterOutcome> outcomes)
{
    std::vector<int> idx(outcomes.size(), -1);
    int next = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].status == OutcomeStatus::RisEffective) {
            idx[i] = next++;
        }
    }
    return idx;
}

} // namespace

std::vector<CurvePoint> prioritize_topn(std::span<const Cluster> clusters, std::span<const ClusterOutcome> outcomes,
                                        std::span<const Reassignment> reassignments, std::size_t outage_count)
{
    if (clusters.size() != outcomes.size()) {
        throw PreconditionError("prioritize_topn: clusters and outcomes differ in length");
    }
    const auto order = size_order(clusters);
    const auto dep_of = deployment_index(outcomes);
    std::vector<CurvePoint> curve{{0, 0.0}};
    std::set<std::size_t> rec;
    for (std::size_t n = 1; n <= order.size(); ++n) {
        const std::size_t i = order[n - 1];
        rec.insert(outcomes[i].recovered_tiles.begin(), outcomes[i].recovered_tiles.end());
        if (dep_of[i] >= 0) {
            for (const auto& r : reassignments) {
                if (r.recovered && r.deployment == dep_of[i]) {
                    rec.insert(r.tile);
                }
            }
        }
        curve.push_back({static_cast<int>(n), outage_count ? static_cast<double>(rec.size()) / outage_count : 0.0});
    }
    return curve;
}

double topn_recovery(std::span<const Cluster> clusters, std::span<const ClusterOutcome> outcomes,
                     std::span<const Reassignment> reassignments, std::size_t outage_count, std::size_t n)
{
    const auto curve = prioritize_topn(clusters, outcomes, reassignments, outage_count);
    return curve[std::min(n, curve.size() - 1)].recovered_fraction;
}

std::vector<DensityPoint> RisPlanner::density_sweep(const PipelineResult& r) const
{
    const auto order = size_order(r.clusters);
    const auto dep_of = deployment_index(r.outcomes);
    const std::size_t total = r.outage_tiles.size();
    auto frac = [&](std::size_t k) { return total ? static_cast<double>(k) / static_cast<double>(total) : 0.0; };
    std::vector<DensityPoint> out{{0, 0, 0.0, 0.0}};
    std::set<std::size_t> rec;
    std::vector<RisDeployment> deps;
    for (std::size_t n = 1; n <= order.size(); ++n) {
        const std::size_t i = order[n - 1];
        rec.insert(r.outcomes[i].recovered_tiles.begin(), r.outcomes[i].recovered_tiles.end());
        if (dep_of[i] >= 0) {
            deps.push_back(r.deployments[static_cast<std::size_t>(dep_of[i])]);
            for (const auto& a : r.reassignments) {
                if (a.recovered && a.deployment == dep_of[i]) {
                    rec.insert(a.tile);
                }
            }
        }
        const auto ext = deps.empty() ? rec : extend_nearby(deps, r.outage_tiles, rec);
        out.push_back({static_cast<int>(n), static_cast<int>(deps.size()), frac(rec.size()), frac(ext.size())});
    }
    return out;
}

nlohmann::json pipeline_report(const PipelineResult& r)
{
    nlohmann::json j;
    j["outage_tiles"] = r.outage_tiles.size();
    j["stages"] = {{"placement", r.fraction(r.recovered_placement)},
                   {"recluster", r.fraction(r.recovered_recluster)},
                   {"reassociation", r.fraction(r.recovered_reassociate)}};
    j["clusters"] = nlohmann::json::array();
    for (std::size_t i = 0; i < r.clusters.size(); ++i) {
        const auto& c = r.clusters[i];
        const auto& o = r.outcomes[i];
        nlohmann::json jc;
        jc["cluster_id"] = c.id;
        jc["stage"] = o.stage;
        jc["size"] = c.cf.count;
        jc["centroid"] = {c.centroid().x, c.centroid().y};
        jc["status"] = to_string(o.status);
        jc["improved_fraction"] = o.improved_fraction;
        jc["centroid_improved"] = o.centroid_improved;
        jc["recovered"] = o.recovered_tiles.size();
        jc["candidates_evaluated"] = o.candidates_evaluated;
        jc["no_rays"] = o.no_rays;
        if (o.candidate) {
            jc["candidate"] = {{"source", to_string(o.candidate->source_kind)},
                               {"location", {o.candidate->location.x, o.candidate->location.y, o.candidate->location.z}},
                               {"distance_m", o.candidate->distance_to_centroid_3d}};
        }
        j["clusters"].push_back(std::move(jc));
    }
    j["deployments"] = deployments_to_json(r.deployments);
    j["reassignments"] = nlohmann::json::array();
    for (const auto& a : r.reassignments) {
        j["reassignments"].push_back(
            {{"tile", a.tile}, {"ris", a.deployment}, {"bs", a.bs}, {"rsrp_dbm", a.rsrp_dbm}, {"recovered", a.recovered}});
    }
    return j;
}

void write_topn_csv(std::span<const CurvePoint> curve, std::ostream& out)
{
    out << "n,recovered_fraction\n";
    for (const auto& p : curve) {
        out << p.n << ',' << format_number(p.recovered_fraction, 6) << '\n';
    }
}

void write_density_csv(std::span<const DensityPoint> sweep, std::ostream& out)
{
    out << "n,ris_count,recovered_fraction,extended_fraction\n";
    for (const auto& p : sweep) {
        out << p.n << ',' << p.ris_count << ',' << format_number(p.recovered_fraction, 6) << ','
            << format_number(p.extended_fraction, 6) << '\n';
    }
}

} // namespace risplan
