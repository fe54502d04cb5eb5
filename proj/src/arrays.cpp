// SPDX-License-Identifier: Apache-2.0

#include "risplan/arrays.hpp"

#include <algorithm>

namespace risplan {

namespace {

constexpr double kElementPeakDbi = 8.0;
constexpr double kSideLobeVertical = 30.0;
constexpr double kMaxAttenuation = 30.0;

void check_index(int idx, int size, const char* what)
{
    if (size < 1 || idx < 0 || idx >= size) {
        throw PreconditionError(std::string(what) + " beam index out of range");
    }
}

std::vector<cplx> dft_vector(int m, int size)
{
    std::vector<cplx> w(static_cast<std::size_t>(size));
    const double scale = 1.0 / std::sqrt(static_cast<double>(size));
    for (int n = 0; n < size; ++n) {
        // Reduce m*n modulo size first so that the phases are exact multiples of 2pi/size.
        const int k = (m * n) % size;
        if ((4 * k) % size == 0) {
            // Quarter turns are represented exactly.
            static constexpr double re[] = {1.0, 0.0, -1.0, 0.0};
            static constexpr double im[] = {0.0, -1.0, 0.0, 1.0};
            const int q = 4 * k / size;
            w[static_cast<std::size_t>(n)] = {scale * re[q], scale * im[q]};
        } else {
            w[static_cast<std::size_t>(n)] = std::polar(scale, -2.0 * kPi * k / size);
        }
    }
    return w;
}

} // namespace

void SystemConfig::validate() const
{
    if (!(frequency > 0.0) || m_h < 1 || m_v < 1) {
        throw InvariantError("system '" + name + "': frequency and array size must be positive");
    }
}

SystemConfig SystemConfig::preset(std::string_view name)
{
    if (name == "4G") {
        return {"4G", 2e9, 20e6, 2, 2, 43.0, 12.2, 1200};
    }
    if (name == "5G") {
        return {"5G", 3.5e9, 100e6, 4, 8, 49.0, 13.85, 3276};
    }
    if (name == "6G") {
        return {"6G", 10e9, 200e6, 4, 16, 44.0, 8.85, 3276};
    }
    throw InvariantError("unknown system '" + std::string(name) + "' (expected 4G, 5G or 6G)");
}

Vec3 SectorArray::boresight() const
{
    const double b = deg_to_rad(bearing_deg);
    const double t = deg_to_rad(tilt_deg);
    return {std::cos(t) * std::cos(b), std::cos(t) * std::sin(b), -std::sin(t)};
}

Vec3 SectorArray::axis_h() const
{
    const double b = deg_to_rad(bearing_deg);
    return {-std::sin(b), std::cos(b), 0.0};
}

Vec3 SectorArray::axis_v() const { return cross(boresight(), axis_h()); }

LocalAngles SectorArray::local(const Vec3& direction) const
{
    const Vec3 d = normalized(direction);
    LocalAngles a;
    const double x = dot(d, boresight());
    a.u = dot(d, axis_h());
    a.v = std::clamp(dot(d, axis_v()), -1.0, 1.0);
    a.theta = std::asin(a.v);
    a.phi = std::atan2(a.u, x);
    return a;
}

void SectorArray::validate() const
{
    if (m_h < 1 || m_v < 1) {
        throw InvariantError("sector array needs at least one element per axis");
    }
    if (!is_finite(position) || !std::isfinite(bearing_deg) || !std::isfinite(tilt_deg)) {
        throw InvariantError("sector array pose must be finite");
    }
    if (!(element_spacing > 0.0)) {
        throw InvariantError("element spacing must be > 0");
    }
}

std::vector<cplx> dft_beam(int m_h_idx, int m_v_idx, int m_h, int m_v)
{
    check_index(m_h_idx, m_h, "horizontal");
    check_index(m_v_idx, m_v, "vertical");
    const auto wh = dft_vector(m_h_idx, m_h);
    const auto wv = dft_vector(m_v_idx, m_v);
    std::vector<cplx> w;
    w.reserve(wh.size() * wv.size());
    for (const auto& a : wh) {
        for (const auto& b : wv) {
            w.push_back(a * b);
        }
    }
    return w;
}

BeamAngles beam_angles(int m_h_idx, int m_v_idx, int m_h, int m_v)
{
    check_index(m_h_idx, m_h, "horizontal");
    check_index(m_v_idx, m_v, "vertical");
    const double sv = 2.0 * m_v_idx / m_v - 1.0;
    const double sh = 2.0 * m_h_idx / m_h - 1.0;
    return {std::asin(sv), std::asin(sh)};
}

double element_gain(double theta_local, double phi_local, double hpbw_el_deg, double hpbw_az_deg)
{
    const double theta = rad_to_deg(theta_local);
    double phi = std::remainder(rad_to_deg(phi_local), 360.0);
    const double a_v = -std::min(12.0 * std::pow(theta / hpbw_el_deg, 2), kSideLobeVertical);
    const double a_h = -std::min(12.0 * std::pow(phi / hpbw_az_deg, 2), kMaxAttenuation);
    return kElementPeakDbi - std::min(-(a_v + a_h), kMaxAttenuation);
}

std::vector<cplx> steering_vector(const SectorArray& array, const Vec3& direction)
{
    const LocalAngles a = array.local(direction);
    // The DFT beam m points where 2 * spacing * u = 2m/M - 1, which is the
    // selection rule of beam_angles; the 1 shift is the feed's alternating sign.
    const double step_h = kPi * (1.0 + 2.0 * array.element_spacing * a.u);
    const double step_v = kPi * (1.0 + 2.0 * array.element_spacing * a.v);
    std::vector<cplx> s;
    s.reserve(static_cast<std::size_t>(array.size()));
    for (int nh = 0; nh < array.m_h; ++nh) {
        for (int nv = 0; nv < array.m_v; ++nv) {
            s.push_back(std::polar(1.0, -(step_h * nh + step_v * nv)));
        }
    }
    return s;
}

void accumulate_path(std::vector<cplx>& h, const SectorArray& array, const Vec3& direction, cplx coeff)
{
    const LocalAngles a = array.local(direction);
    const double g = db_to_linear(element_gain(a.theta, a.phi, array.hpbw_el_deg, array.hpbw_az_deg));
    const cplx c = coeff * std::sqrt(g);
    const auto s = steering_vector(array, direction);
    for (std::size_t i = 0; i < s.size(); ++i) {
        h[i] += c * s[i];
    }
}

std::vector<cplx> channel_vector(std::span<const RayPath> paths, const SectorArray& array, double /*frequency*/)
{
    std::vector<cplx> h(static_cast<std::size_t>(array.size()), cplx{});
    for (const auto& p : paths) {
        accumulate_path(h, array, p.departure_dir, p.amplitude);
    }
    return h;
}

Codebook::Codebook(int m_h, int m_v) : m_h_(m_h), m_v_(m_v)
{
    for (int a = 0; a < m_h; ++a) {
        for (int b = 0; b < m_v; ++b) {
            beams_.push_back(dft_beam(a, b, m_h, m_v));
        }
    }
}

cplx Codebook::response(std::span<const cplx> h, int index) const
{
    const auto& w = beams_[static_cast<std::size_t>(index)];
    cplx acc{};
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += std::conj(h[i]) * w[i];
    }
    return acc;
}

std::vector<double> Codebook::gains(std::span<const cplx> h) const
{
    std::vector<double> g(beams_.size());
    for (std::size_t b = 0; b < beams_.size(); ++b) {
        g[b] = std::norm(response(h, static_cast<int>(b)));
    }
    return g;
}

} // namespace risplan
