// SPDX-License-Identifier: Apache-2.0
//
// Material calibration against measured RSRP: target regions, a cached
// forward model per region, projected Adam with finite-difference gradients,
// outlier exclusion and validation statistics.

#pragma once

#include "risplan/coverage.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace risplan {

inline constexpr double kEarthRadiusM = 6371008.8;

struct MeasurementSample {
    double x = 0.0;
    double y = 0.0;
    double rsrp_dbm = 0.0;
    double sinr_db = std::numeric_limits<double>::quiet_NaN(); // ingested, unused
    bool outdoor = true;
};

/// Local frame anchor: (lat0, lon0) maps to (0, 0).
struct GeoReference {
    double lat0_deg = 0.0;
    double lon0_deg = 0.0;

    Vec2 project(double lat_deg, double lon_deg) const;
};

/// Reads `lat,lon,rsrp_dbm,sinr_db,indoor` (sinr_db may be empty or absent).
std::vector<MeasurementSample> read_measurements_csv(std::istream& in, const GeoReference& ref);
std::vector<MeasurementSample> load_measurements(const std::filesystem::path& path, const GeoReference& ref);
void write_measurements_csv(std::span<const MeasurementSample> samples, const GeoReference& ref, std::ostream& out);

struct MaterialParams {
    double eps_r = 5.0;
    double sigma = 5.0;
    double scatter_s = 0.5;

    double& operator[](int i) { return i == 0 ? eps_r : (i == 1 ? sigma : scatter_s); }
    double operator[](int i) const { return i == 0 ? eps_r : (i == 1 ? sigma : scatter_s); }
    auto operator<=>(const MaterialParams&) const = default;
};

struct ParamBounds {
    MaterialParams lower{1.0, 0.0, 0.0};
    MaterialParams upper{20.0, 15.0, 1.0};

    double range(int i) const { return upper[i] - lower[i]; }
    MaterialParams clamp(MaterialParams p) const;
    bool contains(const MaterialParams& p) const;
};

struct CalibrationConfig {
    int iterations_per_cell = 600;
    double learning_rate = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    double region_size = 10.0;
    int min_samples = 20;
    double group_radius = 100.0;
    double outlier_gap_db = 25.0;
    double high_loss = 144.0;   // (12 dB)^2
    double bound_margin = 0.01; // fraction of the parameter range
    double fd_step = 0.01;      // fraction of the parameter range
    double tile_size = 2.0;
    double ue_height = 1.5;
    MaterialParams initial{5.0, 5.0, 0.5};
    ParamBounds bounds;

    void validate() const;
};

/// Building calibration groups: a building's group_id, or its own id.
struct GroupTable {
    std::vector<std::string> names;
    std::vector<int> group_of_building;

    static GroupTable of(const Scene& scene);
    std::size_t size() const { return names.size(); }
};

enum class ExclusionReason { None, InitialGap, FreeSpaceExtreme, ReflectiveExtreme, NoSignal };
const char* to_string(ExclusionReason r);

struct TargetRegion {
    int ix = 0; // grid-aligned square index
    int iy = 0;
    Box2 bounds;
    std::vector<std::size_t> samples; // indices into the sample list
    double avg_measured_dbm = 0.0;
    std::vector<int> groups; // calibration groups within group_radius
    int cell = -1;           // flattened (bs, sector) serving the region centre
    ExclusionReason excluded = ExclusionReason::None;

    Vec2 center() const { return (bounds.min + bounds.max) * 0.5; }
};

/// Grid-aligned squares holding at least cfg.min_samples outdoor samples,
/// ordered by (iy, ix).
std::vector<TargetRegion> build_target_regions(std::span<const MeasurementSample> samples, const Scene& scene,
                                               const CalibrationConfig& cfg);

/// Outdoor UE positions of the tiles covering a region.
std::vector<Vec3> region_points(const TargetRegion& region, const Scene& scene, const CalibrationConfig& cfg);

/// Material-independent propagation to a set of points, re-evaluated for any
/// per-building material table (one entry per building, then the ground).
class RegionModel {
public:
    RegionModel(const CoverageEngine& engine, std::span<const Vec3> points);

    /// Mean best-server RSRP (dB) over points with a finite value; NaN if none.
    double average_rsrp(std::span<const Material> table) const;
    std::vector<double> rsrp(std::span<const Material> table) const;
    std::size_t point_count() const { return points_.size(); }

private:
    struct PathTerm {
        RayPath path;                          // materials rebound to table indices
        std::vector<std::vector<cplx>> unit_h; // per sector: array response to a unit path
    };
    struct PatchTerm {
        int material = -1;
        double base = 0.0; // free-space factor times scattering lobe
        double cos_incidence = 1.0;
        Polarization pol = Polarization::TE;
        std::vector<std::vector<double>> beam_gain; // per sector, per beam
    };
    struct Link {
        std::vector<PathTerm> paths;
        std::vector<PatchTerm> patches;
        std::size_t sectors = 0;
    };
    struct Point {
        std::vector<Link> links; // per site
    };

    const CoverageEngine& engine_;
    std::vector<Point> points_;
};

/// Per-building material table for a given group assignment, followed by the ground material.
std::vector<Material> material_table(const Scene& scene, const GroupTable& groups,
                                     std::span<const std::optional<MaterialParams>> group_params);

/// Scene with every overridden group bound to a material `cal_<group>`.
Scene calibrated_scene(const Scene& scene, const GroupTable& groups,
                       std::span<const std::optional<MaterialParams>> group_params);

double region_loss(double simulated_dbm, double measured_dbm);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::vector<int> t;
};

/// One projected Adam update of `params` (flattened group parameters) from a gradient.
void adam_update(std::vector<double>& params, std::span<const double> grad, std::span<const std::size_t> active,
                 AdamState& state, const CalibrationConfig& cfg, std::span<const double> lower,
                 std::span<const double> upper);

/// Central finite-difference gradient of f over the active coordinates; probes are clamped to the bounds.
std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                const std::vector<double>& params, std::span<const std::size_t> active,
                                std::span<const double> lower, std::span<const double> upper, double rel_step);

struct CellLog {
    int cell = -1;
    std::size_t sample_count = 0;
    std::vector<std::size_t> regions;
    std::vector<int> groups; // learnable, frozen afterwards
    int restarts = 0;
};

struct CalibrationResult {
    explicit CalibrationResult(Scene s) : scene(std::move(s)) {}

    Scene scene;
    GroupTable groups;
    std::vector<std::optional<MaterialParams>> params; // per group; nullopt keeps the scene material
    std::vector<bool> frozen;
    std::vector<TargetRegion> regions;
    std::vector<double> initial_region_dbm; // simulated region averages before calibration (NaN if none)
    std::vector<double> final_region_dbm;
    std::vector<CellLog> cells;
    std::vector<std::string> warnings;
    std::vector<std::vector<double>> trajectory; // flattened parameters after every iteration
};

CalibrationResult calibrate_scene(const Scene& scene, const Network& network, const SystemConfig& system,
                                  std::span<const MeasurementSample> samples, const TraceConfig& trace,
                                  const CalibrationConfig& cfg, const CoverageOptions& options = {});

struct ErrorStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double std = 0.0; // sample standard deviation
};

ErrorStats error_stats(std::span<const double> values);

struct RegionPair {
    std::size_t region = 0;
    double simulated_dbm = 0.0;
    double measured_dbm = 0.0;
    bool excluded = false;
};

struct ValidationReport {
    std::vector<RegionPair> regions;
    std::vector<double> sample_errors; // simulated - measured, excluded regions and no-signal samples removed
    std::vector<CdfPoint> simulated_cdf;
    std::vector<CdfPoint> measured_cdf;
    ErrorStats stats;
    ErrorStats region_stats;

    nlohmann::json to_json() const;
};

/// Compares the engine's scene against the samples. Samples inside excluded
/// regions are left out of the error statistics.
ValidationReport validation_metrics(const CoverageEngine& engine, std::span<const MeasurementSample> samples,
                                    std::span<const TargetRegion> regions, const CalibrationConfig& cfg);

void write_region_scatter_csv(const ValidationReport& r, std::ostream& out);
void write_error_histogram_csv(const ValidationReport& r, std::ostream& out, double bin_db = 1.0);
void write_validation_cdf_csv(const ValidationReport& r, std::ostream& out);

nlohmann::json calibration_report(const CalibrationResult& r);

} // namespace risplan
