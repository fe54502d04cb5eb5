// SPDX-License-Identifier: Apache-2.0
//
// Facade-mounted reconfigurable surface modelled as a continuous reradiating
// aperture: Gamma(x, y) = R sqrt(eta) A(x, y) exp(j phi(x, y)), integrated by
// physical optics over a half-wavelength sample grid.

#pragma once

#include "risplan/arrays.hpp"
#include "risplan/geometry.hpp"
#include "risplan/raytrace.hpp"
#include "risplan/scene.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace risplan {

struct RisUnit {
    Vec3 center;
    Vec3 outward_normal;
    double width = 1.0;
    double height = 1.0;
    double sample_spacing = 0.5; // wavelengths at the design frequency
    double roughness_r = 1.0;
    double efficiency_eta = 1.0;
    double design_frequency = 3.5e9;
    int nx = 0; // samples along the horizontal aperture axis
    int ny = 0;
    std::vector<double> amplitude; // A, row-major [iy * nx + ix]
    std::vector<double> phase;     // phi, radians

    /// Unit with A = 1 and phi = 0 on a grid of at most sample_spacing wavelengths.
    static RisUnit make(const Vec3& center, const Vec3& outward_normal, double width, double height,
                        double frequency, double eta = 1.0, double roughness = 1.0, double spacing = 0.5);

    void validate() const;

    Vec3 axis_x() const; // horizontal in-plane axis
    Vec3 axis_y() const; // completes (x, y, n) as a right-handed frame
    std::size_t sample_count() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    double sample_area() const { return (width / nx) * (height / ny); }
    /// Local aperture coordinates of sample i.
    Vec2 sample_local(std::size_t i) const;
    Vec3 sample_point(std::size_t i) const;
    cplx gamma(std::size_t i) const;
    std::vector<cplx> gammas() const;

    RisUnit with_phase(std::vector<double> phi) const;
};

/// Linear phase gradient that turns incidence along `incident_dir` (propagation
/// direction, toward the surface) into reradiation along `desired_dir`.
std::vector<double> configure_anomalous_phase(const RisUnit& unit, const Vec3& incident_dir, const Vec3& desired_dir,
                                              double frequency);

/// Candidate steering grid: `toward` first, then `per_side` directions on
/// each side of it, rotated about the aperture's vertical axis in `step_deg` steps.
std::vector<Vec3> steering_grid(const RisUnit& unit, const Vec3& toward, int per_side = 9, double step_deg = 5.0);

/// Reradiated field at `observation` for a unit point source at `source`
/// (incident field exp(-jkr)/r), by aperture integration with explicit Gamma samples.
cplx reradiated_field(const RisUnit& unit, std::span<const cplx> gamma, const Vec3& source, const Vec3& observation,
                      double frequency);

/// Same, using the unit's own Gamma and scaled to path-amplitude units so that
/// it compares directly with lambda / (4 pi L) of a free-space link.
cplx reradiated_amplitude(const RisUnit& unit, const Vec3& source, const Vec3& observation, double frequency);

/// Reradiated power over the outward hemisphere divided by the incident power
/// the aperture intercepts, for a point source at `source`.
double conservation_check(const RisUnit& unit, const Vec3& source, double frequency);

/// Strongest transmitter-to-RIS propagation, reduced to a (virtual) point source.
struct RisIllumination {
    Vec3 virtual_source; // image of the transmitter across every reflecting face
    Vec3 departure;      // launch direction at the transmitter
    cplx coefficient{1.0, 0.0}; // product of reflection factors along the path
    double length = 0.0;
    double power = 0.0; // |path amplitude|^2 at the RIS point
};

/// Picks the strongest of `paths` (amplitudes filled) ending at `rx`.
std::optional<RisIllumination> strongest_illumination(std::span<const RayPath> paths, const Vec3& rx,
                                                      double frequency);

/// Receiver point used to trace toward a RIS: just off the aperture centre.
Vec3 ris_probe_point(const RisUnit& unit);

/// Phase profile pointing the illumination toward `target`.
std::vector<double> steer_toward(const RisUnit& unit, const RisIllumination& illum, const Vec3& target,
                                 double frequency);

/// Adds the transmitter-RIS-receiver path to the sector channel `h`.
void add_ris_path(std::vector<cplx>& h, const SectorArray& array, const RisIllumination& illum, const RisUnit& unit,
                  const Vec3& rx, double frequency);

/// Whether the RIS can reach rx: outward side and line of sight from the aperture centre.
bool ris_sees(const Scene& scene, const RisUnit& unit, const Vec3& rx);

struct RisPathGain {
    double gain = 0.0;        // |h^H w|^2 with the RIS path
    double direct_gain = 0.0; // without it
    bool illuminated = false; // false when no transmitter-RIS path exists
};

/// Gain of one sector beam at `ue` with a RIS configured toward `ue`.
RisPathGain ris_path_gain(const Scene& scene, const SectorArray& array, int beam, const RisUnit& unit, const Vec3& ue,
                          double frequency, const TraceConfig& cfg);

struct RisDeployment {
    std::string ris_id;
    RisUnit unit;
    int serving_bs = -1;
    int serving_sector = -1;
    int serving_beam = -1;
    int target_cluster_id = -1;
    // Per-UE reconfiguration: tile index -> steering target. The profile for a
    // tile is steer_toward(unit, illumination, target), rebuilt on demand.
    std::map<std::size_t, Vec3> ue_targets;
    RisIllumination illumination;

    nlohmann::json to_json() const;
};

nlohmann::json deployments_to_json(std::span<const RisDeployment> deployments);

} // namespace risplan
