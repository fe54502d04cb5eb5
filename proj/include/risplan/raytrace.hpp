// SPDX-License-Identifier: Apache-2.0
//
// Shoot-and-bounce ray tracing. Rays launched on a Fibonacci lattice only
// discover which surface sequences connect a transmitter to a receiver; the
// returned geometry is rebuilt exactly with the image method.

#pragma once

#include "risplan/geometry.hpp"
#include "risplan/scene.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace risplan {

inline constexpr int kMaxBouncesLimit = 8;

enum class InteractionKind : std::uint8_t { Launch, SpecularReflection, DiffuseScatter, Arrival };

struct Interaction {
    InteractionKind kind = InteractionKind::Launch;
    Vec3 point;
    std::optional<Vec3> normal;  // reflections and scatter only; faces the incoming side
    std::optional<int> material; // index into the scene material table
    int face = -1;
    double solid_angle = 0.0; // launch solid angle of the ray tube, diffuse only
};

using FaceSequence = std::vector<int>;

struct RayPath {
    std::vector<Interaction> interactions;
    Vec3 departure_dir;
    Vec3 arrival_dir; // direction of travel at the receiver
    cplx amplitude{0.0, 0.0};
    double length = 0.0;

    int bounce_count() const { return static_cast<int>(interactions.size()) - 2; }
    bool is_los() const { return interactions.size() == 2; }
    bool is_diffuse() const;
    FaceSequence faces() const;
    double power() const { return std::norm(amplitude); }
};

struct TraceConfig {
    std::size_t ray_count = 100000;
    int max_bounces = 4;
    double frequency = 3.5e9;
    double rx_capture_radius = 0.0; // > 0 fixes the radius; 0 scales it with path length
    double capture_scale = 1.5;     // multiplier on L * spacing / 2

    void validate() const;
    /// Mean angular spacing of the launch lattice, radians.
    double angular_spacing() const;
    double capture_radius(double unfolded_length) const;
};

enum class Polarization : std::uint8_t { TE, TM };

std::vector<Vec3> fibonacci_directions(std::size_t n);

Vec3 reflect_dir(const Vec3& incident, const Vec3& normal);

cplx fresnel_coefficient(const Material& material, double frequency, double cos_incidence, Polarization pol);

/// Vertical field: vertical faces see TE incidence, horizontal faces TM.
Polarization polarization_for_normal(const Vec3& normal);

cplx path_amplitude(const RayPath& path, double frequency, std::span<const Material> materials);

/// Field factor of a free-space link of length d: lambda / (4 pi d).
double free_space_amplitude(double frequency, double d);

/// Rebinds interaction material indices to `scene` by face.
void rebind_materials(RayPath& path, const Scene& scene);

RayPath los_path(const Vec3& tx, const Vec3& rx);

/// Exact specular path through `faces` (image method), or nothing when the
/// geometry is infeasible or any leg is obstructed. Amplitude is left zero.
std::optional<RayPath> refine_specular(const Scene& scene, const Vec3& tx, const Vec3& rx, std::span<const int> faces);

/// One segment of a launched ray after `depth` reflections.
struct RaySegment {
    Vec3 start;
    Vec3 dir;
    double length = 0.0;
    double offset = 0.0; // unfolded path length before `start`
    std::uint32_t ray = 0;
    std::uint8_t depth = 0;
};

/// First surface hit of a launched ray (diffuse scattering source).
struct FirstHit {
    Vec3 point;
    Vec3 normal; // faces the transmitter
    Vec3 direction;
    double distance = 0.0;
    int face = -1;
    std::uint32_t ray = 0;
};

/// All rays from one transmitter, kept for repeated capture queries.
class RayLaunch {
public:
    RayLaunch(const Scene& scene, const Vec3& tx, const TraceConfig& cfg, double ceiling = -1.0);

    const Vec3& origin() const { return tx_; }
    double solid_angle() const { return solid_angle_; }
    const std::vector<RaySegment>& segments() const { return segments_; }
    const std::vector<FirstHit>& first_hits() const { return first_hits_; }
    std::span<const int> ray_faces(std::uint32_t ray, int depth) const;

    /// Distinct reflected face sequences captured at `rx`, sorted.
    std::vector<FaceSequence> captured(const Vec3& rx) const;

    /// Buckets segments near the horizontal plane z = height so that
    /// captured() for receivers at that height only visits nearby segments.
    void build_index(double height, double cell_size = 4.0);

private:
    bool segment_captures(const RaySegment& s, const Vec3& rx) const;

    TraceConfig cfg_;
    Vec3 tx_;
    Box2 bounds_;
    double solid_angle_ = 0.0;
    std::vector<RaySegment> segments_;
    std::vector<std::array<int, kMaxBouncesLimit>> ray_faces_;
    std::vector<FirstHit> first_hits_;

    // Optional bucket index.
    bool indexed_ = false;
    double index_height_ = 0.0;
    double cell_ = 4.0;
    Vec2 grid_origin_;
    int grid_cols_ = 0;
    int grid_rows_ = 0;
    std::vector<std::uint32_t> cell_start_;
    std::vector<std::uint32_t> cell_items_;
};

/// LoS plus every captured specular path, sorted by face sequence.
std::vector<RayPath> trace_paths(const Scene& scene, const Vec3& tx, const Vec3& rx, const TraceConfig& cfg);

/// Specular paths from an existing launch.
std::vector<RayPath> paths_from_launch(const Scene& scene, const RayLaunch& launch, const Vec3& rx, double frequency);

/// Single-bounce diffuse paths via the first hits of every launched ray.
std::vector<RayPath> trace_scatter_single(const Scene& scene, const Vec3& tx, const Vec3& rx, const TraceConfig& cfg);

std::vector<RayPath> scatter_paths_from_launch(const Scene& scene, const RayLaunch& launch, const Vec3& rx,
                                               double frequency, bool skip_nonscattering = true);

/// Throws PreconditionError unless p is above ground and outside buildings.
void require_outdoor(const Scene& scene, const Vec3& p, const char* what);

} // namespace risplan
