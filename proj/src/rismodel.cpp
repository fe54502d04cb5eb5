// SPDX-License-Identifier: Apache-2.0

#include "risplan/rismodel.hpp"

#include <algorithm>

namespace risplan {

namespace {

double wrap_phase(double phi) { return std::remainder(phi, 2.0 * kPi); }

void require_outward(const RisUnit& unit, const Vec3& p, const char* what)
{
    if (!(dot(p - unit.center, unit.outward_normal) > 0.0)) {
        throw PreconditionError(std::string(what) + " must lie on the outward side of the RIS");
    }
}

} // namespace

RisUnit RisUnit::make(const Vec3& center, const Vec3& outward_normal, double width, double height, double frequency,
                      double eta, double roughness, double spacing)
{
    if (!(width > 0.0) || !(height > 0.0) || !(frequency > 0.0) || !(spacing > 0.0)) {
        throw InvariantError("RIS width, height, frequency and sample spacing must be positive");
    }
    RisUnit u;
    u.center = center;
    u.outward_normal = normalized(outward_normal);
    u.width = width;
    u.height = height;
    u.sample_spacing = spacing;
    u.roughness_r = roughness;
    u.efficiency_eta = eta;
    u.design_frequency = frequency;
    const double step = spacing * wavelength(frequency);
    u.nx = std::max(1, static_cast<int>(std::ceil(width / step - 1e-9)));
    u.ny = std::max(1, static_cast<int>(std::ceil(height / step - 1e-9)));
    u.amplitude.assign(u.sample_count(), 1.0);
    u.phase.assign(u.sample_count(), 0.0);
    u.validate();
    return u;
}

void RisUnit::validate() const
{
    if (!(width > 0.0) || !(height > 0.0)) {
        throw InvariantError("RIS width and height must be > 0");
    }
    if (!(roughness_r > 0.0 && roughness_r <= 1.0) || !(efficiency_eta >= 0.0 && efficiency_eta <= 1.0)) {
        throw InvariantError("RIS roughness must be in (0, 1] and efficiency in [0, 1]");
    }
    if (std::abs(norm(outward_normal) - 1.0) > 1e-9 || !is_finite(center)) {
        throw InvariantError("RIS normal must be a unit vector and its centre finite");
    }
    if (nx < 1 || ny < 1 || amplitude.size() != sample_count() || phase.size() != sample_count()) {
        throw InvariantError("RIS sample grid does not match its profiles");
    }
    const double a_max = amplitude.empty() ? 0.0 : *std::max_element(amplitude.begin(), amplitude.end());
    const double a_min = amplitude.empty() ? 0.0 : *std::min_element(amplitude.begin(), amplitude.end());
    if (a_min < 0.0 || roughness_r * std::sqrt(efficiency_eta) * a_max > 1.0 + 1e-12) {
        throw InvariantError("RIS amplitude profile must satisfy 0 <= R sqrt(eta) A <= 1");
    }
}

Vec3 RisUnit::axis_x() const
{
    const Vec3& n = outward_normal;
    if (std::abs(n.z) > 0.999) {
        return normalized(cross(Vec3{0, 1, 0}, n));
    }
    return normalized(cross(Vec3{0, 0, 1}, n));
}

Vec3 RisUnit::axis_y() const { return cross(outward_normal, axis_x()); }

Vec2 RisUnit::sample_local(std::size_t i) const
{
    const int ix = static_cast<int>(i % static_cast<std::size_t>(nx));
    const int iy = static_cast<int>(i / static_cast<std::size_t>(nx));
    return {(ix + 0.5) * width / nx - width / 2, (iy + 0.5) * height / ny - height / 2};
}

Vec3 RisUnit::sample_point(std::size_t i) const
{
    const Vec2 l = sample_local(i);
    return center + axis_x() * l.x + axis_y() * l.y;
}

cplx RisUnit::gamma(std::size_t i) const
{
    return std::polar(roughness_r * std::sqrt(efficiency_eta) * amplitude[i], phase[i]);
}

std::vector<cplx> RisUnit::gammas() const
{
    std::vector<cplx> g(sample_count());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = gamma(i);
    }
    return g;
}

RisUnit RisUnit::with_phase(std::vector<double> phi) const
{
    if (phi.size() != sample_count()) {
        throw PreconditionError("phase profile size does not match the RIS sample grid");
    }
    RisUnit u = *this;
    u.phase = std::move(phi);
    return u;
}

std::vector<double> configure_anomalous_phase(const RisUnit& unit, const Vec3& incident_dir, const Vec3& desired_dir,
                                              double frequency)
{
    const Vec3 ki = normalized(incident_dir);
    const Vec3 kr = normalized(desired_dir);
    if (!(dot(ki, unit.outward_normal) < 0.0)) {
        throw PreconditionError("incident direction must travel into the RIS");
    }
    if (!(dot(kr, unit.outward_normal) > 0.0)) {
        throw PreconditionError("desired direction must leave the RIS on its outward side");
    }
    const double k = wavenumber(frequency);
    const Vec3 diff = kr - ki;
    const double gx = -k * dot(diff, unit.axis_x());
    const double gy = -k * dot(diff, unit.axis_y());
    std::vector<double> phi(unit.sample_count());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const Vec2 l = unit.sample_local(i);
        phi[i] = wrap_phase(gx * l.x + gy * l.y);
    }
    return phi;
}

std::vector<Vec3> steering_grid(const RisUnit& unit, const Vec3& toward, int per_side, double step_deg)
{
    const Vec3 t = normalized(toward);
    const Vec3 axis = unit.axis_y();
    std::vector<Vec3> out{t};
    for (int i = 1; i <= per_side; ++i) {
        for (int sign : {-1, 1}) {
            // Rodrigues rotation of t about the aperture's vertical axis.
            const double a = deg_to_rad(sign * i * step_deg);
            const Vec3 r = t * std::cos(a) + cross(axis, t) * std::sin(a) + axis * (dot(axis, t) * (1.0 - std::cos(a)));
            out.push_back(normalized(r));
        }
    }
    return out;
}

cplx reradiated_field(const RisUnit& unit, std::span<const cplx> gamma, const Vec3& source, const Vec3& observation,
                      double frequency)
{
    require_outward(unit, source, "source");
    require_outward(unit, observation, "observation point");
    if (gamma.size() != unit.sample_count()) {
        throw PreconditionError("Gamma sample count does not match the RIS grid");
    }
    const double k = wavenumber(frequency);
    const Vec3 n = unit.outward_normal;
    const Vec3 ex = unit.axis_x();
    const Vec3 ey = unit.axis_y();
    cplx sum{};
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        if (gamma[i] == cplx{}) {
            continue;
        }
        const Vec2 l = unit.sample_local(i);
        const Vec3 p = unit.center + ex * l.x + ey * l.y;
        const Vec3 d1 = p - source;
        const Vec3 d2 = observation - p;
        const double r1 = norm(d1);
        const double r2 = norm(d2);
        const double ci = -dot(d1, n) / r1;
        const double cr = dot(d2, n) / r2;
        if (ci <= 0.0 || cr <= 0.0) {
            continue;
        }
        // Geometric-mean obliquity keeps anomalous reradiation energy-conserving.
        sum += gamma[i] * std::polar(std::sqrt(ci * cr) / (r1 * r2), -k * (r1 + r2));
    }
    return sum * cplx(0.0, k / (2.0 * kPi)) * unit.sample_area();
}

cplx reradiated_amplitude(const RisUnit& unit, const Vec3& source, const Vec3& observation, double frequency)
{
    const auto g = unit.gammas();
    return reradiated_field(unit, g, source, observation, frequency) * (wavelength(frequency) / (4.0 * kPi));
}

double conservation_check(const RisUnit& unit, const Vec3& source, double frequency)
{
    require_outward(unit, source, "source");
    const double k = wavenumber(frequency);
    const double da = unit.sample_area();
    const Vec3 n = unit.outward_normal;
    // Aperture currents c_p = E_inc Gamma sqrt(cos_i) dA; intercepted power |E_inc|^2 cos_i dA.
    std::vector<cplx> c(unit.sample_count());
    double intercepted = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Vec3 d1 = unit.sample_point(i) - source;
        const double r1 = norm(d1);
        const double ci = std::max(0.0, -dot(d1, n) / r1);
        const cplx e_inc = std::polar(1.0 / r1, -k * r1);
        c[i] = e_inc * unit.gamma(i) * std::sqrt(ci) * da;
        intercepted += std::norm(e_inc) * ci * da;
    }
    if (intercepted <= 0.0) {
        return 0.0;
    }
    // Far-field power over the hemisphere in direction cosines (u, v); the
    // outgoing obliquity cancels the 1/cos of the solid-angle element.
    const int nq = 16 * std::max(unit.nx, unit.ny) + 16;
    const double step = 2.0 / nq;
    const auto nxs = static_cast<std::size_t>(unit.nx);
    const auto nys = static_cast<std::size_t>(unit.ny);
    std::vector<double> xs(nxs);
    std::vector<double> ys(nys);
    for (std::size_t i = 0; i < nxs; ++i) {
        xs[i] = unit.sample_local(i).x;
    }
    for (std::size_t j = 0; j < nys; ++j) {
        ys[j] = unit.sample_local(j * nxs).y;
    }
    double total = 0.0;
    std::vector<cplx> row(nys);
    for (int a = 0; a < nq; ++a) {
        const double u = -1.0 + (a + 0.5) * step;
        for (std::size_t j = 0; j < nys; ++j) {
            cplx s{};
            for (std::size_t i = 0; i < nxs; ++i) {
                s += c[j * nxs + i] * std::polar(1.0, k * u * xs[i]);
            }
            row[j] = s;
        }
        for (int b = 0; b < nq; ++b) {
            const double v = -1.0 + (b + 0.5) * step;
            if (u * u + v * v >= 1.0) {
                continue;
            }
            cplx f{};
            for (std::size_t j = 0; j < nys; ++j) {
                f += row[j] * std::polar(1.0, k * v * ys[j]);
            }
            total += std::norm(f);
        }
    }
    const double scale = (k / (2.0 * kPi)) * (k / (2.0 * kPi)) * step * step;
    return total * scale / intercepted;
}

std::optional<RisIllumination> strongest_illumination(std::span<const RayPath> paths, const Vec3& rx,
                                                      double frequency)
{
    const RayPath* best = nullptr;
    for (const auto& p : paths) {
        if (p.is_diffuse()) {
            continue;
        }
        if (!best || p.power() > best->power()) {
            best = &p;
        }
    }
    if (!best || !(best->power() > 0.0)) {
        return std::nullopt;
    }
    RisIllumination ill;
    ill.length = best->length;
    ill.virtual_source = rx - best->arrival_dir * best->length;
    ill.departure = best->departure_dir;
    const cplx free = std::polar(free_space_amplitude(frequency, best->length), -wavenumber(frequency) * best->length);
    ill.coefficient = best->amplitude / free;
    ill.power = best->power();
    return ill;
}

Vec3 ris_probe_point(const RisUnit& unit) { return unit.center + unit.outward_normal * 0.05; }

std::vector<double> steer_toward(const RisUnit& unit, const RisIllumination& illum, const Vec3& target,
                                 double frequency)
{
    return configure_anomalous_phase(unit, unit.center - illum.virtual_source, target - unit.center, frequency);
}

void add_ris_path(std::vector<cplx>& h, const SectorArray& array, const RisIllumination& illum, const RisUnit& unit,
                  const Vec3& rx, double frequency)
{
    const auto g = unit.gammas();
    const cplx field = reradiated_field(unit, g, illum.virtual_source, rx, frequency);
    const cplx coeff = illum.coefficient * field * (wavelength(frequency) / (4.0 * kPi));
    accumulate_path(h, array, illum.departure, coeff);
}

bool ris_sees(const Scene& scene, const RisUnit& unit, const Vec3& rx)
{
    return dot(rx - unit.center, unit.outward_normal) > 0.0 && scene.los_visible(ris_probe_point(unit), rx);
}

RisPathGain ris_path_gain(const Scene& scene, const SectorArray& array, int beam, const RisUnit& unit, const Vec3& ue,
                          double frequency, const TraceConfig& cfg)
{
    TraceConfig c = cfg;
    c.frequency = frequency;
    const Codebook cb(array.m_h, array.m_v);
    if (beam < 0 || beam >= cb.size()) {
        throw PreconditionError("ris_path_gain: beam index out of range");
    }
    const auto direct = trace_paths(scene, array.position, ue, c);
    auto h = channel_vector(direct, array, frequency);
    RisPathGain out;
    out.direct_gain = std::norm(cb.response(h, beam));
    const Vec3 probe = ris_probe_point(unit);
    const auto incident = trace_paths(scene, array.position, probe, c);
    const auto illum = strongest_illumination(incident, probe, frequency);
    out.illuminated = illum.has_value();
    if (illum && ris_sees(scene, unit, ue)) {
        const RisUnit steered = unit.with_phase(steer_toward(unit, *illum, ue, frequency));
        add_ris_path(h, array, *illum, steered, ue, frequency);
    }
    out.gain = std::norm(cb.response(h, beam));
    return out;
}

nlohmann::json RisDeployment::to_json() const
{
    return {{"ris_id", ris_id},
            {"center", {unit.center.x, unit.center.y, unit.center.z}},
            {"normal", {unit.outward_normal.x, unit.outward_normal.y, unit.outward_normal.z}},
            {"width", unit.width},
            {"height", unit.height},
            {"eta", unit.efficiency_eta},
            {"r", unit.roughness_r},
            {"serving_bs", serving_bs},
            {"serving_sector", serving_sector},
            {"serving_beam", serving_beam},
            {"cluster_id", target_cluster_id}};
}

nlohmann::json deployments_to_json(std::span<const RisDeployment> deployments)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : deployments) {
        arr.push_back(d.to_json());
    }
    return arr;
}

} // namespace risplan
