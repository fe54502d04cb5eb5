// SPDX-License-Identifier: Apache-2.0
//
// RIS deployment pipeline: candidate generation (strongest ray, all rays,
// scatter points), per-cluster evaluation, re-clustering, re-association,
// top-N prioritization and the nearby-tile extension.

#pragma once

#include "risplan/clustering.hpp"
#include "risplan/coverage.hpp"
#include "risplan/rismodel.hpp"

#include <json.hpp>

#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <vector>

namespace risplan {

enum class CandidateSource { StrongestRayBounce, FirstBounce, SecondBounce, ScatterPoint };
enum class Strategy { Reflection, Scattering };
enum class OutcomeStatus { RisEffective, Deferred, Reassociated, Unserved };

const char* to_string(CandidateSource s);
const char* to_string(Strategy s);
const char* to_string(OutcomeStatus s);
Strategy parse_strategy(std::string_view s);

struct Candidate {
    Vec3 location;
    CandidateSource source_kind = CandidateSource::StrongestRayBounce;
    int source_path_id = -1; // index of the path (or scatter ray) it came from
    int bs = -1;             // site whose path produced it
    double distance_to_centroid_3d = 0.0;
};

struct PipelineConfig {
    double threshold_dbm = kDefaultOutageDbm;
    double t1 = kDefaultBirchThreshold;
    double t2 = kReclusterThreshold;
    double effective_fraction = 0.4;
    double ris_width = 11.24;
    double ris_height = 11.24;
    double eta = 1.0;
    double r = 1.0;
    Strategy strategy = Strategy::Reflection;
    double nearby_range_m = 60.0;
    int max_candidate_evals = 32; // per cluster, all-ray and scattering stages
    double dedup_m = 0.5;
    int scatter_ray_factor = 3;   // scattering launches use this many times the specular ray count
    bool recluster = true;
    bool reassociate = true;

    void validate() const;
};

struct ClusterOutcome {
    int cluster_id = -1;
    int stage = 1; // 1 placement, 2 re-clustering
    OutcomeStatus status = OutcomeStatus::Unserved;
    std::optional<RisDeployment> deployment;
    std::optional<Candidate> candidate;
    double improved_fraction = 0.0;
    bool centroid_improved = false;
    double centroid_baseline_dbm = -std::numeric_limits<double>::infinity();
    double centroid_ris_dbm = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> improved_tiles;
    std::vector<std::size_t> recovered_tiles; // crossed the outage threshold
    std::vector<std::size_t> deferred_tiles;  // not improved
    int candidates_evaluated = 0;
    bool no_rays = false;
};

struct Reassignment {
    std::size_t tile = 0;
    int deployment = -1; // index into the deployment list
    int bs = -1;
    double rsrp_dbm = -std::numeric_limits<double>::infinity();
    bool recovered = false;
};

struct CurvePoint {
    int n = 0;
    double recovered_fraction = 0.0;
};

struct DensityPoint {
    int n = 0;         // largest clusters considered
    int ris_count = 0; // deployments among them
    double recovered_fraction = 0.0; // each RIS limited to its cluster
    double extended_fraction = 0.0;  // RISs also serving outage tiles within the nearby range
};

struct PipelineResult {
    std::vector<std::size_t> outage_tiles;
    std::vector<Cluster> clusters; // stage-1 then stage-2 clusters; members are tile indices
    std::vector<ClusterOutcome> outcomes; // parallel to clusters
    std::vector<RisDeployment> deployments;
    std::vector<Reassignment> reassignments;
    std::set<std::size_t> recovered_placement;
    std::set<std::size_t> recovered_recluster;  // cumulative
    std::set<std::size_t> recovered_reassociate; // cumulative
    std::vector<CurvePoint> topn_curve;

    double fraction(const std::set<std::size_t>& s) const;
};

/// Clusters of grid tiles: BIRCH over tile centres, members mapped to tile indices.
std::vector<Cluster> cluster_tiles(const TileGrid& grid, std::span<const std::size_t> tiles, double threshold_t,
                                   int first_id = 0);

class RisPlanner {
public:
    RisPlanner(const CoverageEngine& engine, const CoverageMap& baseline, const PipelineConfig& cfg);

    const PipelineConfig& config() const { return cfg_; }
    const CoverageEngine& engine() const { return engine_; }
    const CoverageMap& baseline() const { return baseline_; }

    std::vector<Candidate> strongest_ray_candidates(const Vec3& centroid, bool* no_rays = nullptr) const;
    std::vector<Candidate> all_ray_candidates(const Vec3& centroid) const;
    std::vector<Candidate> scattering_candidates(const Vec3& centroid) const;

    /// RIS mounted on the facade at the candidate, facing outward; nothing if the
    /// location does not lie on a wall.
    std::optional<RisUnit> mount(const Candidate& c) const;

    /// Sector and beam maximizing RSRP at the RIS. Throws InvalidCandidate if no sector reaches it.
    ServingTriple bs_beam_for_ris(const RisUnit& unit) const;

    /// Deployment at a mounted unit (serving beam and illumination), or nothing if unservable.
    std::optional<RisDeployment> deploy(const RisUnit& unit) const;

    /// Best-server RSRP at p with the RIS steered to `target`; never below the RIS-free value.
    double rsrp_with_ris(const RisDeployment& dep, const Vec3& p, const Vec3& target,
                         std::optional<double> baseline_dbm = std::nullopt) const;
    /// Same for a grid tile with the RIS steered to its centre.
    double tile_rsrp_with_ris(const RisDeployment& dep, std::size_t tile) const;

    /// Baseline RSRP at the centroid of a cluster (or its nearest outdoor member).
    Vec3 evaluation_point(const Cluster& c) const;
    double baseline_rsrp_at(const Vec3& p) const;

    ClusterOutcome evaluate_candidate(const Cluster& cluster, const Candidate& cand) const;
    ClusterOutcome place_for_cluster(const Cluster& cluster) const;

    std::vector<Reassignment> reassociate(std::span<const std::size_t> tiles,
                                          std::span<const RisDeployment> deployments) const;

    /// Tiles recovered when each RIS also serves outage tiles within range and LoS.
    std::set<std::size_t> extend_nearby(std::span<const RisDeployment> deployments,
                                        std::span<const std::size_t> outage_tiles,
                                        const std::set<std::size_t>& recovered) const;

    PipelineResult run() const;

    /// Top-N curve of a finished run, with and without the nearby extension.
    std::vector<DensityPoint> density_sweep(const PipelineResult& r) const;

private:
    const RayLaunch& scatter_launch(int bs) const;
    std::vector<RayPath> specular_paths(int bs, const Vec3& rx) const;

    const CoverageEngine& engine_;
    const CoverageMap& baseline_;
    PipelineConfig cfg_;
    mutable std::vector<std::unique_ptr<RayLaunch>> scatter_launches_;
    mutable std::once_flag scatter_once_;
};

/// Recovery curve over clusters sorted by size (U descending, then id).
std::vector<CurvePoint> prioritize_topn(std::span<const Cluster> clusters, std::span<const ClusterOutcome> outcomes,
                                        std::span<const Reassignment> reassignments, std::size_t outage_count);

/// Recovered fraction using only the n largest clusters' deployments.
double topn_recovery(std::span<const Cluster> clusters, std::span<const ClusterOutcome> outcomes,
                     std::span<const Reassignment> reassignments, std::size_t outage_count, std::size_t n);

nlohmann::json pipeline_report(const PipelineResult& r);
void write_topn_csv(std::span<const CurvePoint> curve, std::ostream& out);
void write_density_csv(std::span<const DensityPoint> sweep, std::ostream& out);

} // namespace risplan
