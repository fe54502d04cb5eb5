// SPDX-License-Identifier: Apache-2.0
//
// Tile-level directional gain, RSRP and best-server coverage maps.

#pragma once

#include "risplan/arrays.hpp"
#include "risplan/raytrace.hpp"
#include "risplan/scene.hpp"

#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace risplan {

inline constexpr double kDefaultOutageDbm = -100.0;

struct SectorPose {
    double bearing_deg = 0.0;
    double tilt_deg = 0.0;
};

struct Site {
    std::string id;
    Vec3 position;
    std::vector<SectorPose> sectors;
};

/// Base stations; index order is the canonical (bs, sector) order.
struct Network {
    std::vector<Site> sites;

    static Network from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
    void validate(const Scene& scene) const;

    SectorArray sector_array(int bs, int sector, const SystemConfig& system) const;
    std::size_t sector_count() const;
};

Network load_network(const std::filesystem::path& path);

struct ServingTriple {
    int bs = -1;
    int sector = -1;
    int beam = -1;

    bool valid() const { return bs >= 0; }
    auto operator<=>(const ServingTriple&) const = default;
};

struct TileRecord {
    int row = 0;
    int col = 0;
    Vec3 center;
    int best_bs = -1;
    int best_sector = -1;
    int best_beam = -1;
    double rsrp_dbm = -std::numeric_limits<double>::infinity();
    bool in_outage = false;
    bool indoor = false;

    ServingTriple serving() const { return {best_bs, best_sector, best_beam}; }
};

struct CoverageMap {
    TileGrid grid;
    std::vector<TileRecord> records;
    SystemConfig system;
    double threshold_dbm = kDefaultOutageDbm;
    int samples_per_tile = 1;

    std::size_t outdoor_count() const;
};

/// RSRP in dBm from a linear gain; zero gain maps to -infinity.
double rsrp(double gain, const SystemConfig& system);

/// Diffuse-scattering patch: first-hit points of launched rays pooled per facade cell.
struct DiffusePatch {
    Vec3 center;
    Vec3 normal;    // faces the transmitter
    Vec3 departure; // mean launch direction
    double solid_angle = 0.0;
    double cos_incidence = 1.0;
    int face = -1;
    double distance = 0.0; // mean transmitter-to-patch length
};

/// Material-independent propagation from one site to one receiver.
struct LinkGeometry {
    std::vector<RayPath> specular;          // LoS and reflections, amplitude unset
    std::vector<const DiffusePatch*> diffuse; // patches visible from the receiver
};

/// Per-sector channel at one receiver: coherent vector plus incoherent diffuse power per beam.
struct SectorChannel {
    std::vector<cplx> h;
    std::vector<double> diffuse;

    /// |h^H w|^2 + diffuse for every beam.
    std::vector<double> beam_gains(const Codebook& codebook) const;
};

enum class DiffuseMode { Off, ScatteringFaces, AllFaces };

struct CoverageOptions {
    int samples_per_tile = 1; // 1 (centre) or 5 (centre plus cross)
    DiffuseMode diffuse = DiffuseMode::ScatteringFaces;
    double scatter_patch_m = 4.0;
    double threshold_dbm = kDefaultOutageDbm;
};

struct BestServer {
    ServingTriple serving;
    double gain = 0.0;
    double rsrp_dbm = -std::numeric_limits<double>::infinity();
};

/// Propagation model over a fixed network: one ray launch per site shared by
/// all of its sectors, reused for every receiver.
class CoverageEngine {
public:
    CoverageEngine(const Scene& scene, const Network& network, const SystemConfig& system, const TraceConfig& cfg,
                   const CoverageOptions& options = {});

    const Scene& scene() const { return scene_; }
    const Network& network() const { return network_; }
    const SystemConfig& system() const { return system_; }
    const TraceConfig& trace_config() const { return cfg_; }
    const CoverageOptions& options() const { return options_; }
    const Codebook& codebook() const { return codebook_; }
    const SectorArray& sector(int bs, int sector) const;
    const RayLaunch& launch(int bs) const { return *launches_[static_cast<std::size_t>(bs)]; }

    /// Prepares capture indices for receivers at this height (tile UEs).
    void index_height(double z);

    LinkGeometry geometry(int bs, const Vec3& rx) const;

    /// Channels for every (bs, sector) at rx, with amplitudes evaluated against
    /// the materials of `materials` (defaults to the engine scene).
    std::vector<std::vector<SectorChannel>> channels(const Vec3& rx, const Scene* materials = nullptr) const;
    std::vector<std::vector<SectorChannel>> channels(const std::vector<LinkGeometry>& geometry,
                                                     const Vec3& rx, const Scene* materials = nullptr) const;

    /// Per-(bs, sector, beam) gain at rx, averaged over the tile sample pattern
    /// when `tile_size` > 0. Layout: [bs][sector][beam].
    std::vector<std::vector<std::vector<double>>> gains(const Vec3& rx, double tile_size = 0.0,
                                                        const Scene* materials = nullptr) const;

    BestServer best_server(const Vec3& rx, double tile_size = 0.0, const Scene* materials = nullptr) const;

    CoverageMap coverage_map(const TileGrid& grid) const;

    /// Sample positions of a tile centred at c.
    std::vector<Vec3> tile_samples(const Vec3& c, double tile_size) const;

private:
    void build_patches(int bs);

    const Scene& scene_;
    Network network_;
    SystemConfig system_;
    TraceConfig cfg_;
    CoverageOptions options_;
    Codebook codebook_;
    std::vector<std::vector<SectorArray>> arrays_;
    std::vector<std::unique_ptr<RayLaunch>> launches_;
    std::vector<std::vector<DiffusePatch>> patches_;
};

BestServer pick_best(const std::vector<std::vector<std::vector<double>>>& gains, const SystemConfig& system);

/// Directional gain of one sector and beam, averaged over the tile sample pattern.
double tile_gain(const Scene& scene, const SectorArray& array, int beam, const TileGrid& grid, std::size_t tile,
                 const TraceConfig& cfg, int samples_per_tile = 1);

CoverageMap coverage_map(const Scene& scene, const Network& network, const SystemConfig& system,
                         const TileGrid& grid, const TraceConfig& cfg, const CoverageOptions& options = {});

/// Outdoor tiles strictly below the threshold.
std::vector<std::size_t> outage_set(const CoverageMap& map, double threshold_dbm = kDefaultOutageDbm);

struct CdfPoint {
    double rsrp_dbm;
    double cdf;
};

struct RsrpCdf {
    std::vector<CdfPoint> points;  // finite outdoor tiles, one step per distinct value
    double no_signal_fraction = 0.0; // outdoor tiles at -infinity
};

RsrpCdf rsrp_cdf(const CoverageMap& map);

void write_coverage_csv(const CoverageMap& map, std::ostream& out);
void write_cdf_csv(const RsrpCdf& cdf, std::ostream& out);

/// Fixed-precision number formatting shared by all report writers.
std::string format_number(double v, int precision = 6);

} // namespace risplan
