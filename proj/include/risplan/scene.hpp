// SPDX-License-Identifier: Apache-2.0
//
// Urban scene: 2.5D extruded buildings over a ground plane, with a BVH over
// the building faces for exact nearest-hit queries.

#pragma once

#include "risplan/geometry.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace risplan {

struct Material {
    std::string id;
    double eps_r = 1.0;     // relative permittivity
    double sigma = 0.0;     // conductivity, S/m
    double scatter_s = 0.0; // fraction of reflected energy sent to the diffuse lobe

    void validate() const;
};

struct Building {
    std::string id;
    std::vector<Vec2> footprint; // counterclockwise
    double height = 0.0;
    std::string material_id;
    std::optional<std::string> group_id;
};

enum class FaceKind : std::uint8_t { Wall, Roof, Ground };

/// One planar building face. Walls are vertical quads spanning a footprint
/// edge from z = 0 to the building height; roofs are the footprint polygon
/// lifted to the building height.
struct Face {
    FaceKind kind = FaceKind::Wall;
    int building = -1; // -1 for the ground
    int edge = -1;     // footprint edge index for walls
    Vec3 point;        // a point on the plane
    Vec3 normal;       // outward unit normal
    Vec2 a, b;         // wall edge endpoints (walls only)
    double z_top = 0.0;
    int material = -1; // index into Scene::materials()
    Aabb box;
};

struct Hit {
    Vec3 point;
    Vec3 normal; // faces the ray origin: dot(normal, direction) < 0
    double distance = 0.0;
    int face = -1;
    int material = -1;
    int building = -1; // -1 for the ground
};

/// A point snapped onto a building wall, used to mount RIS apertures.
struct FacadePoint {
    Vec3 center;
    Vec3 outward_normal;
    int building = -1;
    int face = -1;
};

class InvalidCandidate : public Error {
public:
    using Error::Error;
};

/// Segment/geometry contact closer than this counts as a hit (conservative
/// for visibility tests).
inline constexpr double kGrazingTolerance = 1e-6;

class Scene {
public:
    Scene(std::vector<Material> materials, std::vector<Building> buildings, Box2 bounds,
          std::optional<std::string> ground_material_id);

    static Scene from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;

    const std::vector<Material>& materials() const { return materials_; }
    const std::vector<Building>& buildings() const { return buildings_; }
    const std::vector<Face>& faces() const { return faces_; }
    const Box2& bounds() const { return bounds_; }
    const std::optional<std::string>& ground_material_id() const { return ground_material_id_; }

    /// Face index used for ground interactions (one past the building faces).
    int ground_face() const { return static_cast<int>(faces_.size()); }
    bool has_reflecting_ground() const { return ground_material_ >= 0; }
    int ground_material() const { return ground_material_; }

    int material_index(const std::string& id) const;
    double max_height() const { return max_height_; }

    /// Material index of any face including the virtual ground face.
    int face_material(int face) const;
    Vec3 face_normal(int face) const;
    Vec3 face_point(int face) const;
    bool face_contains(int face, const Vec3& p, double tol) const;

    std::optional<Hit> intersect_first(const Vec3& origin, const Vec3& direction, double max_range,
                                       int ignore_face = -1) const;

    /// True iff the open segment (a, b) touches no building face and stays
    /// above ground.
    bool los_visible(const Vec3& a, const Vec3& b) const;

    /// Index of the building containing `p` (strictly inside its volume), or -1.
    int building_containing(const Vec3& p) const;
    bool is_indoor(const Vec3& p) const { return building_containing(p) >= 0; }

    /// Projects a point lying within `tolerance` of a wall onto that wall.
    /// Throws InvalidCandidate when no wall is close enough.
    FacadePoint snap_to_facade(const Vec3& p, double tolerance = 0.5) const;

    /// Same geometry with a different material table and per-building
    /// material assignment (indices into `materials`).
    Scene with_materials(std::vector<Material> materials, std::span<const std::string> building_material_ids) const;

private:
    struct BvhNode {
        Aabb box;
        int left = -1;
        int right = -1;
        int first = 0; // into face_order_
        int count = 0;
    };

    void validate() const;
    void build_faces();
    void build_bvh();
    int build_node(int first, int count, int depth);
    bool intersect_face(int face, const Vec3& origin, const Vec3& dir, double t_min, double t_max,
                        double& t_hit) const;
    bool segment_blocked(const Vec3& a, const Vec3& b) const;

    std::vector<Material> materials_;
    std::vector<Building> buildings_;
    Box2 bounds_;
    std::optional<std::string> ground_material_id_;
    int ground_material_ = -1;
    double max_height_ = 0.0;

    std::vector<Face> faces_;
    std::vector<int> face_order_;
    std::vector<BvhNode> nodes_;
};

Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);

/// Regular grid of UE tiles at a fixed height.
struct TileGrid {
    Vec3 origin; // lower-left corner of tile (0, 0)
    double tile_size = 2.0;
    int rows = 0;
    int cols = 0;
    double ue_height = 1.5;

    static TileGrid covering(const Box2& bounds, double tile_size = 2.0, double ue_height = 1.5);

    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
    std::size_t index(int row, int col) const
    {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(col);
    }
    int row_of(std::size_t index) const { return static_cast<int>(index / static_cast<std::size_t>(cols)); }
    int col_of(std::size_t index) const { return static_cast<int>(index % static_cast<std::size_t>(cols)); }

    Vec3 center(int row, int col) const
    {
        return {origin.x + (col + 0.5) * tile_size, origin.y + (row + 0.5) * tile_size, ue_height};
    }
    Vec3 center(std::size_t index) const { return center(row_of(index), col_of(index)); }

    /// Tile containing (x, y), if inside the grid.
    std::optional<std::size_t> locate(double x, double y) const;

    void validate() const;
};

double polygon_signed_area(std::span<const Vec2> poly);
bool point_in_polygon(std::span<const Vec2> poly, const Vec2& p);
double distance_to_polygon_boundary(std::span<const Vec2> poly, const Vec2& p);

} // namespace risplan
