// SPDX-License-Identifier: Apache-2.0

#include "risplan/raytrace.hpp"

#include "risplan/parallel.hpp"

#include <algorithm>
#include <limits>

namespace risplan {

namespace {

constexpr double kRefineTolerance = 1e-6;

double exit_distance(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi)
{
    double t = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
        if (d[axis] > 0.0) {
            t = std::min(t, (hi[axis] - o[axis]) / d[axis]);
        } else if (d[axis] < 0.0) {
            t = std::min(t, (lo[axis] - o[axis]) / d[axis]);
        }
    }
    return t;
}

} // namespace

bool RayPath::is_diffuse() const
{
    return std::any_of(interactions.begin(), interactions.end(),
                       [](const Interaction& i) { return i.kind == InteractionKind::DiffuseScatter; });
}

FaceSequence RayPath::faces() const
{
    FaceSequence seq;
    for (std::size_t i = 1; i + 1 < interactions.size(); ++i) {
        seq.push_back(interactions[i].face);
    }
    return seq;
}

void TraceConfig::validate() const
{
    if (ray_count < 1) {
        throw InvariantError("ray_count must be >= 1");
    }
    if (max_bounces < 1 || max_bounces > kMaxBouncesLimit) {
        throw InvariantError("max_bounces must lie in [1, " + std::to_string(kMaxBouncesLimit) + "]");
    }
    if (!(frequency > 0.0)) {
        throw InvariantError("frequency must be > 0");
    }
    if (!(rx_capture_radius >= 0.0) || !(capture_scale > 0.0)) {
        throw InvariantError("capture radius settings must be positive");
    }
}

double TraceConfig::angular_spacing() const
{
    return std::sqrt(4.0 * kPi / static_cast<double>(ray_count));
}

double TraceConfig::capture_radius(double unfolded_length) const
{
    if (rx_capture_radius > 0.0) {
        return rx_capture_radius;
    }
    return capture_scale * unfolded_length * angular_spacing() / 2.0;
}

std::vector<Vec3> fibonacci_directions(std::size_t n)
{
    if (n < 1) {
        throw PreconditionError("fibonacci_directions: n must be >= 1");
    }
    const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> dirs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden_angle * static_cast<double>(i);
        dirs[i] = {r * std::cos(phi), r * std::sin(phi), z};
    }
    return dirs;
}

Vec3 reflect_dir(const Vec3& incident, const Vec3& normal)
{
    return incident - normal * (2.0 * dot(incident, normal));
}

cplx fresnel_coefficient(const Material& material, double frequency, double cos_incidence, Polarization pol)
{
    if (!(cos_incidence > 0.0 && cos_incidence <= 1.0 + 1e-12)) {
        throw PreconditionError("fresnel_coefficient: cos_incidence must lie in (0, 1]");
    }
    const double c = std::min(cos_incidence, 1.0);
    const cplx eta(material.eps_r, -material.sigma / (2.0 * kPi * frequency * kVacuumPermittivity));
    const cplx root = std::sqrt(eta - (1.0 - c * c));
    if (pol == Polarization::TE) {
        return (c - root) / (c + root);
    }
    return (eta * c - root) / (eta * c + root);
}

Polarization polarization_for_normal(const Vec3& normal)
{
    return std::abs(normal.z) > 0.5 ? Polarization::TM : Polarization::TE;
}

double free_space_amplitude(double frequency, double d)
{
    return wavelength(frequency) / (4.0 * kPi * d);
}

cplx path_amplitude(const RayPath& path, double frequency, std::span<const Material> materials)
{
    const auto& its = path.interactions;
    if (its.size() < 2) {
        throw PreconditionError("path_amplitude: path needs at least two interactions");
    }
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < its.size(); ++i) {
        total += distance(its[i].point, its[i + 1].point);
    }
    const double k = wavenumber(frequency);
    cplx amp = free_space_amplitude(frequency, total) * std::exp(cplx(0.0, -k * total));
    for (std::size_t i = 1; i + 1 < its.size(); ++i) {
        const Interaction& it = its[i];
        if (!it.material || *it.material < 0 || static_cast<std::size_t>(*it.material) >= materials.size() ||
            !it.normal) {
            throw InvariantError("path_amplitude: unresolved material reference");
        }
        const Material& m = materials[static_cast<std::size_t>(*it.material)];
        const Vec3 n = *it.normal;
        const Vec3 d_in = normalized(it.point - its[i - 1].point);
        const double cos_i = std::clamp(std::abs(dot(d_in, n)), 1e-12, 1.0);
        const cplx gamma = fresnel_coefficient(m, frequency, cos_i, polarization_for_normal(n));
        if (it.kind == InteractionKind::SpecularReflection) {
            amp *= gamma * std::sqrt(1.0 - m.scatter_s);
        } else if (it.kind == InteractionKind::DiffuseScatter) {
            const Vec3 out = its[i + 1].point - it.point;
            const double d2 = norm(out);
            const double cos_s = std::abs(dot(out / d2, n));
            const double lobe = std::min(1.0, (total / d2) * std::sqrt(it.solid_angle * cos_s / kPi));
            amp *= lobe * std::sqrt(m.scatter_s) * std::abs(gamma);
        } else {
            throw InvariantError("path_amplitude: launch/arrival inside a path");
        }
    }
    return amp;
}

void rebind_materials(RayPath& path, const Scene& scene)
{
    for (auto& it : path.interactions) {
        if (it.kind == InteractionKind::SpecularReflection || it.kind == InteractionKind::DiffuseScatter) {
            it.material = scene.face_material(it.face);
        }
    }
}

RayPath los_path(const Vec3& tx, const Vec3& rx)
{
    RayPath p;
    Interaction a;
    a.kind = InteractionKind::Launch;
    a.point = tx;
    Interaction b;
    b.kind = InteractionKind::Arrival;
    b.point = rx;
    p.interactions = {a, b};
    p.departure_dir = normalized(rx - tx);
    p.arrival_dir = p.departure_dir;
    p.length = distance(tx, rx);
    return p;
}

std::optional<RayPath> refine_specular(const Scene& scene, const Vec3& tx, const Vec3& rx, std::span<const int> faces)
{
    const std::size_t n = faces.size();
    std::vector<Vec3> images(n + 1);
    images[0] = tx;
    for (std::size_t k = 0; k < n; ++k) {
        images[k + 1] = mirror_point(images[k], scene.face_point(faces[k]), scene.face_normal(faces[k]));
    }
    std::vector<Vec3> pts(n + 2);
    pts[0] = tx;
    pts[n + 1] = rx;
    Vec3 target = rx;
    for (std::size_t kk = n; kk-- > 0;) {
        const int f = faces[kk];
        const Vec3 nrm = scene.face_normal(f);
        const Vec3& img = images[kk + 1];
        const double denom = dot(target - img, nrm);
        if (std::abs(denom) < 1e-12) {
            return std::nullopt;
        }
        const double s = dot(scene.face_point(f) - img, nrm) / denom;
        if (!(s > 0.0 && s < 1.0)) {
            return std::nullopt;
        }
        const Vec3 p = img + (target - img) * s;
        if (!scene.face_contains(f, p, kRefineTolerance)) {
            return std::nullopt;
        }
        pts[kk + 1] = p;
        target = p;
    }

    RayPath path;
    path.interactions.resize(n + 2);
    path.interactions[0].kind = InteractionKind::Launch;
    path.interactions[0].point = tx;
    path.interactions[n + 1].kind = InteractionKind::Arrival;
    path.interactions[n + 1].point = rx;
    for (std::size_t k = 0; k < n; ++k) {
        const int f = faces[k];
        const Vec3 p = pts[k + 1];
        Vec3 nrm = scene.face_normal(f);
        const double side_in = dot(pts[k] - p, nrm);
        const double side_out = dot(pts[k + 2] - p, nrm);
        if (!(side_in * side_out > 0.0) || std::abs(side_in) < 1e-9 || std::abs(side_out) < 1e-9) {
            return std::nullopt;
        }
        if (side_in < 0.0) {
            nrm = -nrm;
        }
        Interaction& it = path.interactions[k + 1];
        it.kind = InteractionKind::SpecularReflection;
        it.point = p;
        it.normal = nrm;
        it.material = scene.face_material(f);
        it.face = f;
    }
    double length = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double leg = distance(pts[k], pts[k + 1]);
        if (leg < 1e-9 || !scene.los_visible(pts[k], pts[k + 1])) {
            return std::nullopt;
        }
        length += leg;
    }
    path.length = length;
    path.departure_dir = normalized(pts[1] - pts[0]);
    path.arrival_dir = normalized(pts[n + 1] - pts[n]);
    return path;
}

RayLaunch::RayLaunch(const Scene& scene, const Vec3& tx, const TraceConfig& cfg, double ceiling)
    : cfg_(cfg), tx_(tx), bounds_(scene.bounds())
{
    cfg_.validate();
    const std::size_t n = cfg_.ray_count;
    solid_angle_ = 4.0 * kPi / static_cast<double>(n);
    if (!(ceiling > 0.0)) {
        ceiling = std::max(scene.max_height(), tx.z) + 1.0;
    }
    const Vec3 lo{bounds_.min.x - 1.0, bounds_.min.y - 1.0, -1.0};
    const Vec3 hi{bounds_.max.x + 1.0, bounds_.max.y + 1.0, ceiling};
    const std::vector<Vec3> dirs = fibonacci_directions(n);
    ray_faces_.assign(n, {});

    // Chunked so that concatenating per-chunk output in chunk order keeps the
    // segment list independent of scheduling.
    const std::size_t chunks = std::min<std::size_t>(n, 256);
    std::vector<std::vector<RaySegment>> seg_parts(chunks);
    std::vector<std::vector<FirstHit>> hit_parts(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t begin = n * c / chunks;
        const std::size_t end = n * (c + 1) / chunks;
        auto& segs = seg_parts[c];
        auto& hits = hit_parts[c];
        for (std::size_t r = begin; r < end; ++r) {
            Vec3 o = tx;
            Vec3 d = dirs[r];
            double offset = 0.0;
            int depth = 0;
            int ignore = -1;
            for (;;) {
                const double t_exit = exit_distance(o, d, lo, hi);
                if (!(t_exit > 0.0)) {
                    break;
                }
                const auto hit = scene.intersect_first(o, d, t_exit, ignore);
                const double len = hit ? hit->distance : t_exit;
                if (depth > 0) {
                    segs.push_back({o, d, len, offset, static_cast<std::uint32_t>(r), static_cast<std::uint8_t>(depth)});
                } else if (hit) {
                    hits.push_back({hit->point, hit->normal, d, hit->distance, hit->face, static_cast<std::uint32_t>(r)});
                }
                if (!hit || hit->material < 0 || depth == cfg_.max_bounces) {
                    break;
                }
                ray_faces_[r][static_cast<std::size_t>(depth)] = hit->face;
                ++depth;
                offset += len;
                o = hit->point;
                d = reflect_dir(d, hit->normal);
                ignore = hit->face;
            }
        }
    });
    for (std::size_t c = 0; c < chunks; ++c) {
        segments_.insert(segments_.end(), seg_parts[c].begin(), seg_parts[c].end());
        first_hits_.insert(first_hits_.end(), hit_parts[c].begin(), hit_parts[c].end());
    }
}

std::span<const int> RayLaunch::ray_faces(std::uint32_t ray, int depth) const
{
    return {ray_faces_[ray].data(), static_cast<std::size_t>(depth)};
}

bool RayLaunch::segment_captures(const RaySegment& s, const Vec3& rx) const
{
    const Vec3 v = rx - s.start;
    const double t = std::clamp(dot(v, s.dir), 0.0, s.length);
    const Vec3 q = s.start + s.dir * t;
    const Vec3 gap = rx - q;
    const double r = cfg_.capture_radius(s.offset + t);
    return dot(gap, gap) <= r * r;
}

std::vector<FaceSequence> RayLaunch::captured(const Vec3& rx) const
{
    std::vector<FaceSequence> out;
    auto consider = [&](const RaySegment& s) {
        if (segment_captures(s, rx)) {
            const auto f = ray_faces(s.ray, s.depth);
            out.emplace_back(f.begin(), f.end());
        }
    };
    bool done = false;
    if (indexed_ && rx.z == index_height_) {
        const int c = static_cast<int>(std::floor((rx.x - grid_origin_.x) / cell_));
        const int r = static_cast<int>(std::floor((rx.y - grid_origin_.y) / cell_));
        if (c >= 0 && r >= 0 && c < grid_cols_ && r < grid_rows_) {
            const std::size_t cell = static_cast<std::size_t>(r) * static_cast<std::size_t>(grid_cols_) +
                                     static_cast<std::size_t>(c);
            for (std::uint32_t i = cell_start_[cell]; i < cell_start_[cell + 1]; ++i) {
                consider(segments_[cell_items_[i]]);
            }
            done = true;
        }
    }
    if (!done) {
        for (const auto& s : segments_) {
            consider(s);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void RayLaunch::build_index(double height, double cell_size)
{
    cell_ = cell_size;
    index_height_ = height;
    grid_origin_ = bounds_.min;
    grid_cols_ = std::max(1, static_cast<int>(std::ceil(bounds_.width() / cell_)));
    grid_rows_ = std::max(1, static_cast<int>(std::ceil(bounds_.height() / cell_)));
    const std::size_t ncell = static_cast<std::size_t>(grid_cols_) * static_cast<std::size_t>(grid_rows_);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs; // (cell, segment)
    std::vector<std::uint32_t> local;
    for (std::size_t si = 0; si < segments_.size(); ++si) {
        const RaySegment& s = segments_[si];
        const double r = cfg_.capture_radius(s.offset + s.length);
        double t0 = 0.0;
        double t1 = s.length;
        if (std::abs(s.dir.z) < 1e-12) {
            if (std::abs(s.start.z - height) > r) {
                continue;
            }
        } else {
            const double ta = (height - r - s.start.z) / s.dir.z;
            const double tb = (height + r - s.start.z) / s.dir.z;
            t0 = std::max(t0, std::min(ta, tb));
            t1 = std::min(t1, std::max(ta, tb));
            if (t0 > t1) {
                continue;
            }
        }
        const Vec3 p0 = s.start + s.dir * t0;
        const Vec3 p1 = s.start + s.dir * t1;
        const double span2d = std::hypot(p1.x - p0.x, p1.y - p0.y);
        const int steps = static_cast<int>(std::ceil(span2d / (0.5 * cell_)));
        const double pad = r + 0.5 * cell_;
        local.clear();
        for (int k = 0; k <= steps; ++k) {
            const double u = steps == 0 ? 0.0 : static_cast<double>(k) / steps;
            const double x = p0.x + (p1.x - p0.x) * u;
            const double y = p0.y + (p1.y - p0.y) * u;
            const int c_lo = std::max(0, static_cast<int>(std::floor((x - pad - grid_origin_.x) / cell_)));
            const int c_hi = std::min(grid_cols_ - 1, static_cast<int>(std::floor((x + pad - grid_origin_.x) / cell_)));
            const int r_lo = std::max(0, static_cast<int>(std::floor((y - pad - grid_origin_.y) / cell_)));
            const int r_hi = std::min(grid_rows_ - 1, static_cast<int>(std::floor((y + pad - grid_origin_.y) / cell_)));
            for (int rr = r_lo; rr <= r_hi; ++rr) {
                for (int cc = c_lo; cc <= c_hi; ++cc) {
                    local.push_back(static_cast<std::uint32_t>(rr * grid_cols_ + cc));
                }
            }
        }
        std::sort(local.begin(), local.end());
        local.erase(std::unique(local.begin(), local.end()), local.end());
        for (auto c : local) {
            pairs.emplace_back(c, static_cast<std::uint32_t>(si));
        }
    }
    cell_start_.assign(ncell + 1, 0);
    for (const auto& p : pairs) {
        ++cell_start_[p.first + 1];
    }
    for (std::size_t c = 0; c < ncell; ++c) {
        cell_start_[c + 1] += cell_start_[c];
    }
    cell_items_.assign(pairs.size(), 0);
    std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (const auto& p : pairs) {
        cell_items_[fill[p.first]++] = p.second;
    }
    indexed_ = true;
}

void require_outdoor(const Scene& scene, const Vec3& p, const char* what)
{
    if (!is_finite(p) || p.z < 0.0) {
        throw PreconditionError(std::string(what) + " must be finite and above ground");
    }
    if (scene.is_indoor(p)) {
        throw PreconditionError(std::string(what) + " lies inside a building");
    }
}

std::vector<RayPath> paths_from_launch(const Scene& scene, const RayLaunch& launch, const Vec3& rx, double frequency)
{
    const Vec3& tx = launch.origin();
    std::vector<RayPath> paths;
    if (distance(tx, rx) > 0.0 && scene.los_visible(tx, rx)) {
        paths.push_back(los_path(tx, rx));
    }
    for (const auto& seq : launch.captured(rx)) {
        if (auto p = refine_specular(scene, tx, rx, seq)) {
            paths.push_back(std::move(*p));
        }
    }
    for (auto& p : paths) {
        p.amplitude = path_amplitude(p, frequency, scene.materials());
    }
    return paths;
}

std::vector<RayPath> trace_paths(const Scene& scene, const Vec3& tx, const Vec3& rx, const TraceConfig& cfg)
{
    cfg.validate();
    require_outdoor(scene, tx, "transmitter");
    require_outdoor(scene, rx, "receiver");
    const double ceiling = std::max({scene.max_height(), tx.z, rx.z}) + 1.0;
    const RayLaunch launch(scene, tx, cfg, ceiling);
    return paths_from_launch(scene, launch, rx, cfg.frequency);
}

std::vector<RayPath> scatter_paths_from_launch(const Scene& scene, const RayLaunch& launch, const Vec3& rx,
                                               double frequency, bool skip_nonscattering)
{
    std::vector<RayPath> paths;
    const Vec3& tx = launch.origin();
    for (const auto& h : launch.first_hits()) {
        const int m = scene.face_material(h.face);
        if (m < 0) {
            continue;
        }
        if (skip_nonscattering && !(scene.materials()[static_cast<std::size_t>(m)].scatter_s > 0.0)) {
            continue;
        }
        if (!(dot(rx - h.point, h.normal) > 1e-9) || !scene.los_visible(h.point, rx)) {
            continue;
        }
        RayPath p;
        p.interactions.resize(3);
        p.interactions[0].kind = InteractionKind::Launch;
        p.interactions[0].point = tx;
        Interaction& s = p.interactions[1];
        s.kind = InteractionKind::DiffuseScatter;
        s.point = h.point;
        s.normal = h.normal;
        s.material = m;
        s.face = h.face;
        s.solid_angle = launch.solid_angle();
        p.interactions[2].kind = InteractionKind::Arrival;
        p.interactions[2].point = rx;
        p.departure_dir = h.direction;
        p.arrival_dir = normalized(rx - h.point);
        p.length = h.distance + distance(h.point, rx);
        p.amplitude = path_amplitude(p, frequency, scene.materials());
        paths.push_back(std::move(p));
    }
    return paths;
}

std::vector<RayPath> trace_scatter_single(const Scene& scene, const Vec3& tx, const Vec3& rx, const TraceConfig& cfg)
{
    cfg.validate();
    require_outdoor(scene, tx, "transmitter");
    require_outdoor(scene, rx, "receiver");
    TraceConfig one = cfg;
    one.max_bounces = 1;
    const double ceiling = std::max({scene.max_height(), tx.z, rx.z}) + 1.0;
    const RayLaunch launch(scene, tx, one, ceiling);
    return scatter_paths_from_launch(scene, launch, rx, cfg.frequency);
}

} // namespace risplan
