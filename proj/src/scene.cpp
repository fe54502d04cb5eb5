// SPDX-License-Identifier: Apache-2.0

#include "risplan/scene.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace risplan {

namespace {

constexpr int kLeafSize = 4;

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2)
{
    auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); };
    auto on_segment = [](const Vec2& a, const Vec2& b, const Vec2& c) {
        return std::min(a.x, b.x) <= c.x && c.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= c.y &&
               c.y <= std::max(a.y, b.y);
    };
    const double d1 = orient(q1, q2, p1);
    const double d2 = orient(q1, q2, p2);
    const double d3 = orient(p1, p2, q1);
    const double d4 = orient(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
        return true;
    }
    return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
           (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b)
{
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + ab * t));
}

bool ray_box(const Aabb& box, const Vec3& o, const Vec3& inv_d, double t_min, double t_max)
{
    for (int axis = 0; axis < 3; ++axis) {
        const double lo = (box.lo[axis] - o[axis]) * inv_d[axis];
        const double hi = (box.hi[axis] - o[axis]) * inv_d[axis];
        const double t0 = std::min(lo, hi);
        const double t1 = std::max(lo, hi);
        // NaN (0 * inf) comparisons fall through and keep the interval open.
        if (t0 > t_min) {
            t_min = t0;
        }
        if (t1 < t_max) {
            t_max = t1;
        }
        if (t_min > t_max) {
            return false;
        }
    }
    return true;
}

std::string id_from_json(const nlohmann::json& j)
{
    if (j.is_string()) {
        return j.get<std::string>();
    }
    if (j.is_number_integer()) {
        return std::to_string(j.get<long long>());
    }
    throw ParseError("identifier must be a string or an integer");
}

} // namespace

double polygon_signed_area(std::span<const Vec2> poly)
{
    double area = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        area += cross(poly[i], poly[(i + 1) % poly.size()]);
    }
    return 0.5 * area;
}

bool point_in_polygon(std::span<const Vec2> poly, const Vec2& p)
{
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < x_cross) {
                inside = !inside;
            }
        }
    }
    return inside;
}

double distance_to_polygon_boundary(std::span<const Vec2> poly, const Vec2& p)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
    }
    return best;
}

void Material::validate() const
{
    if (!(std::isfinite(eps_r) && eps_r >= 1.0)) {
        throw InvariantError("material '" + id + "': eps_r must be >= 1");
    }
    if (!(std::isfinite(sigma) && sigma >= 0.0)) {
        throw InvariantError("material '" + id + "': sigma must be >= 0");
    }
    if (!(std::isfinite(scatter_s) && scatter_s >= 0.0 && scatter_s <= 1.0)) {
        throw InvariantError("material '" + id + "': scatter_s must lie in [0, 1]");
    }
}

Scene::Scene(std::vector<Material> materials, std::vector<Building> buildings, Box2 bounds,
             std::optional<std::string> ground_material_id)
    : materials_(std::move(materials)), buildings_(std::move(buildings)), bounds_(bounds),
      ground_material_id_(std::move(ground_material_id))
{
    // Footprints are stored counterclockwise so that wall normals point outward.
    for (auto& b : buildings_) {
        if (b.footprint.size() >= 3 && polygon_signed_area(b.footprint) < 0.0) {
            std::reverse(b.footprint.begin(), b.footprint.end());
        }
    }
    validate();
    if (ground_material_id_) {
        ground_material_ = material_index(*ground_material_id_);
    }
    for (const auto& b : buildings_) {
        max_height_ = std::max(max_height_, b.height);
    }
    build_faces();
    build_bvh();
}

void Scene::validate() const
{
    std::set<std::string> material_ids;
    for (const auto& m : materials_) {
        m.validate();
        if (!material_ids.insert(m.id).second) {
            throw InvariantError("duplicate material id '" + m.id + "'");
        }
    }
    if (!(bounds_.max.x > bounds_.min.x && bounds_.max.y > bounds_.min.y)) {
        throw InvariantError("scene bounds must have positive extent");
    }
    if (ground_material_id_ && !material_ids.contains(*ground_material_id_)) {
        throw InvariantError("ground material '" + *ground_material_id_ + "' is not defined");
    }
    std::set<std::string> building_ids;
    for (const auto& b : buildings_) {
        const std::string who = "building '" + b.id + "'";
        if (!building_ids.insert(b.id).second) {
            throw InvariantError("duplicate " + who);
        }
        if (!(std::isfinite(b.height) && b.height > 0.0)) {
            throw InvariantError(who + ": height must be > 0");
        }
        if (b.footprint.size() < 3) {
            throw InvariantError(who + ": footprint needs at least 3 vertices");
        }
        if (!material_ids.contains(b.material_id)) {
            throw InvariantError(who + ": unknown material '" + b.material_id + "'");
        }
        const std::size_t n = b.footprint.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& p = b.footprint[i];
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
                throw InvariantError(who + ": non-finite footprint vertex");
            }
            if (!bounds_.contains(p)) {
                throw InvariantError(who + ": footprint leaves the scene bounds");
            }
            if (p == b.footprint[(i + 1) % n]) {
                throw InvariantError(who + ": repeated footprint vertex");
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
                if (adjacent) {
                    continue;
                }
                if (segments_intersect(b.footprint[i], b.footprint[(i + 1) % n], b.footprint[j],
                                       b.footprint[(j + 1) % n])) {
                    throw InvariantError(who + ": footprint is self-intersecting");
                }
            }
        }
        if (std::abs(polygon_signed_area(b.footprint)) <= 0.0) {
            throw InvariantError(who + ": footprint has zero area");
        }
    }
}

int Scene::material_index(const std::string& id) const
{
    for (std::size_t i = 0; i < materials_.size(); ++i) {
        if (materials_[i].id == id) {
            return static_cast<int>(i);
        }
    }
    throw InvariantError("unknown material '" + id + "'");
}

void Scene::build_faces()
{
    faces_.clear();
    for (std::size_t bi = 0; bi < buildings_.size(); ++bi) {
        const Building& b = buildings_[bi];
        const int mat = material_index(b.material_id);
        const std::size_t n = b.footprint.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 a = b.footprint[i];
            const Vec2 c = b.footprint[(i + 1) % n];
            const Vec2 e = c - a;
            const double len = norm(e);
            Face f;
            f.kind = FaceKind::Wall;
            f.building = static_cast<int>(bi);
            f.edge = static_cast<int>(i);
            f.a = a;
            f.b = c;
            f.z_top = b.height;
            f.point = {a.x, a.y, 0.0};
            f.normal = {e.y / len, -e.x / len, 0.0};
            f.material = mat;
            f.box.expand(Vec3{a.x, a.y, 0.0});
            f.box.expand(Vec3{c.x, c.y, b.height});
            faces_.push_back(f);
        }
        Face roof;
        roof.kind = FaceKind::Roof;
        roof.building = static_cast<int>(bi);
        roof.z_top = b.height;
        roof.point = {b.footprint[0].x, b.footprint[0].y, b.height};
        roof.normal = {0.0, 0.0, 1.0};
        roof.material = mat;
        for (const auto& p : b.footprint) {
            roof.box.expand(Vec3{p.x, p.y, b.height});
        }
        faces_.push_back(roof);
    }
}

void Scene::build_bvh()
{
    // Pad boxes so that near-grazing contacts reach the exact face test.
    const Vec3 pad{10 * kGrazingTolerance, 10 * kGrazingTolerance, 10 * kGrazingTolerance};
    for (auto& f : faces_) {
        f.box.lo -= pad;
        f.box.hi += pad;
    }
    face_order_.resize(faces_.size());
    std::iota(face_order_.begin(), face_order_.end(), 0);
    nodes_.clear();
    if (!faces_.empty()) {
        nodes_.reserve(2 * faces_.size());
        build_node(0, static_cast<int>(faces_.size()), 0);
    }
}

int Scene::build_node(int first, int count, int depth)
{
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Aabb box;
    Aabb centers;
    for (int i = first; i < first + count; ++i) {
        box.expand(faces_[face_order_[i]].box);
        centers.expand(faces_[face_order_[i]].box.center());
    }
    nodes_[index].box = box;
    if (count <= kLeafSize || depth > 40) {
        nodes_[index].first = first;
        nodes_[index].count = count;
        return index;
    }
    const Vec3 extent = centers.hi - centers.lo;
    int axis = 0;
    if (extent.y > extent.x) {
        axis = 1;
    }
    if (extent.z > extent[axis]) {
        axis = 2;
    }
    const int mid = first + count / 2;
    std::nth_element(face_order_.begin() + first, face_order_.begin() + mid, face_order_.begin() + first + count,
                     [&](int a, int b) {
                         const double ca = faces_[a].box.center()[axis];
                         const double cb = faces_[b].box.center()[axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    const int left = build_node(first, mid - first, depth + 1);
    const int right = build_node(mid, first + count - mid, depth + 1);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
}

int Scene::face_material(int face) const
{
    if (face == ground_face()) {
        return ground_material_;
    }
    return faces_.at(static_cast<std::size_t>(face)).material;
}

Vec3 Scene::face_normal(int face) const
{
    if (face == ground_face()) {
        return {0.0, 0.0, 1.0};
    }
    return faces_.at(static_cast<std::size_t>(face)).normal;
}

Vec3 Scene::face_point(int face) const
{
    if (face == ground_face()) {
        return {0.0, 0.0, 0.0};
    }
    return faces_.at(static_cast<std::size_t>(face)).point;
}

bool Scene::face_contains(int face, const Vec3& p, double tol) const
{
    if (face == ground_face()) {
        return std::abs(p.z) <= tol;
    }
    const Face& f = faces_[static_cast<std::size_t>(face)];
    if (f.kind == FaceKind::Wall) {
        const Vec2 e = f.b - f.a;
        const double len2 = dot(e, e);
        const double u = dot(Vec2{p.x, p.y} - f.a, e) / len2;
        const double slack = tol / std::sqrt(len2);
        return u >= -slack && u <= 1.0 + slack && p.z >= -tol && p.z <= f.z_top + tol;
    }
    const auto& poly = buildings_[static_cast<std::size_t>(f.building)].footprint;
    const Vec2 q{p.x, p.y};
    return point_in_polygon(poly, q) || distance_to_polygon_boundary(poly, q) <= tol;
}

bool Scene::intersect_face(int face, const Vec3& origin, const Vec3& dir, double t_min, double t_max,
                           double& t_hit) const
{
    const Face& f = faces_[static_cast<std::size_t>(face)];
    const double denom = dot(f.normal, dir);
    if (std::abs(denom) < 1e-15) {
        return false;
    }
    const double t = dot(f.point - origin, f.normal) / denom;
    if (!(t > t_min && t < t_max)) {
        return false;
    }
    if (!face_contains(face, origin + dir * t, kGrazingTolerance)) {
        return false;
    }
    t_hit = t;
    return true;
}

std::optional<Hit> Scene::intersect_first(const Vec3& origin, const Vec3& direction, double max_range,
                                          int ignore_face) const
{
    constexpr double kTMin = 1e-9;
    double best_t = max_range;
    int best_face = -1;

    if (!nodes_.empty()) {
        const Vec3 inv{1.0 / direction.x, 1.0 / direction.y, 1.0 / direction.z};
        int stack[64];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const BvhNode& node = nodes_[static_cast<std::size_t>(stack[--top])];
            if (!ray_box(node.box, origin, inv, kTMin, best_t)) {
                continue;
            }
            if (node.left < 0) {
                for (int i = node.first; i < node.first + node.count; ++i) {
                    const int face = face_order_[static_cast<std::size_t>(i)];
                    if (face == ignore_face) {
                        continue;
                    }
                    double t = 0.0;
                    if (intersect_face(face, origin, direction, kTMin, best_t, t) &&
                        (t < best_t || (t == best_t && face < best_face))) {
                        best_t = t;
                        best_face = face;
                    }
                }
            } else {
                stack[top++] = node.left;
                stack[top++] = node.right;
            }
        }
    }

    if (ignore_face != ground_face() && direction.z < 0.0) {
        const double t = -origin.z / direction.z;
        if (t > kTMin && t < best_t) {
            best_t = t;
            best_face = ground_face();
        }
    }

    if (best_face < 0) {
        return std::nullopt;
    }
    Hit hit;
    hit.distance = best_t;
    hit.face = best_face;
    hit.point = origin + direction * best_t;
    Vec3 n = face_normal(best_face);
    if (dot(n, direction) > 0.0) {
        n = -n;
    }
    hit.normal = n;
    hit.material = face_material(best_face);
    hit.building = best_face == ground_face() ? -1 : faces_[static_cast<std::size_t>(best_face)].building;
    if (best_face == ground_face()) {
        hit.point.z = 0.0;
    }
    return hit;
}

bool Scene::segment_blocked(const Vec3& a, const Vec3& b) const
{
    const Vec3 d = b - a;
    const double len = norm(d);
    if (len <= 2.0 * kGrazingTolerance || nodes_.empty()) {
        return false;
    }
    const Vec3 dir = d / len;
    const Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    const double t_lo = kGrazingTolerance;
    const double t_hi = len - kGrazingTolerance;
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const BvhNode& node = nodes_[static_cast<std::size_t>(stack[--top])];
        if (!ray_box(node.box, a, inv, t_lo - kGrazingTolerance, t_hi + kGrazingTolerance)) {
            continue;
        }
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                double t = 0.0;
                if (intersect_face(face_order_[static_cast<std::size_t>(i)], a, dir, t_lo, t_hi, t)) {
                    return true;
                }
            }
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return false;
}

bool Scene::los_visible(const Vec3& a, const Vec3& b) const
{
    if (a.z < -kGrazingTolerance || b.z < -kGrazingTolerance) {
        return false;
    }
    // Canonical endpoint order makes the predicate exactly symmetric.
    const bool swap = std::tie(b.x, b.y, b.z) < std::tie(a.x, a.y, a.z);
    return swap ? !segment_blocked(b, a) : !segment_blocked(a, b);
}

int Scene::building_containing(const Vec3& p) const
{
    for (std::size_t i = 0; i < buildings_.size(); ++i) {
        const Building& b = buildings_[i];
        if (p.z < 0.0 || p.z >= b.height) {
            continue;
        }
        if (point_in_polygon(b.footprint, Vec2{p.x, p.y})) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

FacadePoint Scene::snap_to_facade(const Vec3& p, double tolerance) const
{
    double best = std::numeric_limits<double>::infinity();
    FacadePoint out;
    for (std::size_t i = 0; i < faces_.size(); ++i) {
        const Face& f = faces_[i];
        if (f.kind != FaceKind::Wall) {
            continue;
        }
        const Vec2 e = f.b - f.a;
        const double len2 = dot(e, e);
        const double u = std::clamp(dot(Vec2{p.x, p.y} - f.a, e) / len2, 0.0, 1.0);
        const Vec2 q = f.a + e * u;
        const Vec3 c{q.x, q.y, std::clamp(p.z, 0.0, f.z_top)};
        const double dist = distance(p, c);
        if (dist < best) {
            best = dist;
            out.center = c;
            out.outward_normal = f.normal;
            out.building = f.building;
            out.face = static_cast<int>(i);
        }
    }
    if (!(best <= tolerance)) {
        std::ostringstream msg;
        msg << "no facade within " << tolerance << " m of (" << p.x << ", " << p.y << ", " << p.z << ")";
        throw InvalidCandidate(msg.str());
    }
    return out;
}

Scene Scene::with_materials(std::vector<Material> materials, std::span<const std::string> building_material_ids) const
{
    if (building_material_ids.size() != buildings_.size()) {
        throw PreconditionError("with_materials: one material id per building required");
    }
    std::vector<Building> buildings = buildings_;
    for (std::size_t i = 0; i < buildings.size(); ++i) {
        buildings[i].material_id = building_material_ids[i];
    }
    return Scene(std::move(materials), std::move(buildings), bounds_, ground_material_id_);
}

Scene Scene::from_json(const nlohmann::json& doc)
{
    try {
        std::vector<Material> materials;
        for (const auto& m : doc.at("materials")) {
            Material mat;
            mat.id = id_from_json(m.at("id"));
            mat.eps_r = m.at("eps_r").get<double>();
            mat.sigma = m.at("sigma").get<double>();
            mat.scatter_s = m.value("scatter_s", 0.0);
            materials.push_back(std::move(mat));
        }
        std::vector<Building> buildings;
        for (const auto& b : doc.at("buildings")) {
            Building bld;
            bld.id = id_from_json(b.at("id"));
            for (const auto& v : b.at("footprint")) {
                if (v.size() != 2) {
                    throw ParseError("building '" + bld.id + "': footprint vertices must be [x, y]");
                }
                bld.footprint.push_back({v[0].get<double>(), v[1].get<double>()});
            }
            bld.height = b.at("height").get<double>();
            bld.material_id = id_from_json(b.at("material_id"));
            if (b.contains("group_id") && !b["group_id"].is_null()) {
                bld.group_id = id_from_json(b["group_id"]);
            }
            buildings.push_back(std::move(bld));
        }
        const auto& bmin = doc.at("bounds").at("min");
        const auto& bmax = doc.at("bounds").at("max");
        Box2 bounds{{bmin.at(0).get<double>(), bmin.at(1).get<double>()},
                    {bmax.at(0).get<double>(), bmax.at(1).get<double>()}};
        std::optional<std::string> ground;
        if (doc.contains("ground_material_id") && !doc["ground_material_id"].is_null()) {
            ground = id_from_json(doc["ground_material_id"]);
        }
        return Scene(std::move(materials), std::move(buildings), bounds, std::move(ground));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scene JSON: ") + e.what());
    }
}

nlohmann::json Scene::to_json() const
{
    nlohmann::json doc;
    doc["materials"] = nlohmann::json::array();
    for (const auto& m : materials_) {
        doc["materials"].push_back({{"id", m.id}, {"eps_r", m.eps_r}, {"sigma", m.sigma}, {"scatter_s", m.scatter_s}});
    }
    doc["buildings"] = nlohmann::json::array();
    for (const auto& b : buildings_) {
        nlohmann::json fp = nlohmann::json::array();
        for (const auto& p : b.footprint) {
            fp.push_back({p.x, p.y});
        }
        nlohmann::json jb = {{"id", b.id}, {"footprint", fp}, {"height", b.height}, {"material_id", b.material_id}};
        if (b.group_id) {
            jb["group_id"] = *b.group_id;
        }
        doc["buildings"].push_back(std::move(jb));
    }
    doc["bounds"] = {{"min", {bounds_.min.x, bounds_.min.y}}, {"max", {bounds_.max.x, bounds_.max.y}}};
    doc["ground_material_id"] = ground_material_id_ ? nlohmann::json(*ground_material_id_) : nlohmann::json(nullptr);
    return doc;
}

Scene load_scene(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open scene file " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("scene file " + path.string() + ": " + e.what());
    }
    return Scene::from_json(doc);
}

void save_scene(const Scene& scene, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write scene file " + path.string());
    }
    out << scene.to_json().dump(2) << '\n';
}

TileGrid TileGrid::covering(const Box2& bounds, double tile_size, double ue_height)
{
    TileGrid g;
    g.origin = {bounds.min.x, bounds.min.y, 0.0};
    g.tile_size = tile_size;
    g.ue_height = ue_height;
    g.cols = static_cast<int>(std::ceil(bounds.width() / tile_size - 1e-9));
    g.rows = static_cast<int>(std::ceil(bounds.height() / tile_size - 1e-9));
    g.validate();
    return g;
}

std::optional<std::size_t> TileGrid::locate(double x, double y) const
{
    const double c = std::floor((x - origin.x) / tile_size);
    const double r = std::floor((y - origin.y) / tile_size);
    if (c < 0 || r < 0 || c >= cols || r >= rows) {
        return std::nullopt;
    }
    return index(static_cast<int>(r), static_cast<int>(c));
}

void TileGrid::validate() const
{
    if (!(tile_size > 0.0) || rows <= 0 || cols <= 0) {
        throw InvariantError("tile grid needs tile_size > 0 and at least one row and column");
    }
}

} // namespace risplan
