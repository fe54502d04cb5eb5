// SPDX-License-Identifier: Apache-2.0
//
// Base-station sector arrays: element pattern, DFT codebook and channel
// vector assembly.
//
// Local frame of a sector: f is the boresight (bearing counterclockwise from
// +x, downtilt positive), e_h = (-sin b, cos b, 0) the horizontal array axis
// and e_v = f x e_h the vertical axis. Element (n_h, n_v) sits at
// (n_h e_h + n_v e_v) * spacing and is stored at index n_h * M_v + n_v, which
// is the Kronecker order of w_h (x) w_v.

#pragma once

#include "risplan/geometry.hpp"
#include "risplan/raytrace.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace risplan {

struct SystemConfig {
    std::string name;
    double frequency = 0.0; // Hz
    double bandwidth = 0.0; // Hz
    int m_h = 1;
    int m_v = 1;
    double tx_power_cell_dbm = 0.0;
    double tx_power_subcarrier_dbm = 0.0;
    int subcarrier_count = 0;

    int codebook_size() const { return m_h * m_v; }
    void validate() const;

    /// Built-in 4G / 5G / 6G presets.
    static SystemConfig preset(std::string_view name);
};

struct LocalAngles {
    double theta = 0.0; // elevation above the boresight plane, rad
    double phi = 0.0;   // azimuth from boresight, rad
    double u = 0.0;     // direction cosine on the horizontal array axis
    double v = 0.0;     // direction cosine on the vertical array axis
};

struct SectorArray {
    Vec3 position;
    double bearing_deg = 0.0;
    double tilt_deg = 0.0;
    int m_h = 1;
    int m_v = 1;
    double element_spacing = 0.5; // wavelengths
    double hpbw_az_deg = 65.0;
    double hpbw_el_deg = 10.0;

    int size() const { return m_h * m_v; }
    Vec3 boresight() const;
    Vec3 axis_h() const;
    Vec3 axis_v() const;
    LocalAngles local(const Vec3& direction) const;
    void validate() const;
};

struct BeamAngles {
    double theta = 0.0;
    double phi = 0.0;
};

/// Unit-norm Kronecker DFT beam w_{m_h} (x) w_{m_v}.
std::vector<cplx> dft_beam(int m_h_idx, int m_v_idx, int m_h, int m_v);

/// Angles selected by a beam: sin(theta) = 2 m_v / M_v - 1, sin(phi) = 2 m_h / M_h - 1.
BeamAngles beam_angles(int m_h_idx, int m_v_idx, int m_h, int m_v);

/// Element gain in dBi (3GPP TR 38.901 pattern, 8 dBi peak).
double element_gain(double theta_local, double phi_local, double hpbw_el_deg = 10.0, double hpbw_az_deg = 65.0);

/// Array response toward a world-frame direction.
std::vector<cplx> steering_vector(const SectorArray& array, const Vec3& direction);

/// h = sum over paths of amplitude * sqrt(g(departure)) * a(departure).
std::vector<cplx> channel_vector(std::span<const RayPath> paths, const SectorArray& array, double frequency);

/// Adds one path contribution with complex coefficient `coeff` leaving along `direction`.
void accumulate_path(std::vector<cplx>& h, const SectorArray& array, const Vec3& direction, cplx coeff);

/// All beams of an M_h x M_v codebook, indexed m_h * M_v + m_v.
class Codebook {
public:
    Codebook(int m_h, int m_v);
    int m_h() const { return m_h_; }
    int m_v() const { return m_v_; }
    int size() const { return m_h_ * m_v_; }
    const std::vector<cplx>& beam(int index) const { return beams_[static_cast<std::size_t>(index)]; }

    /// h^H w for one beam.
    cplx response(std::span<const cplx> h, int index) const;
    /// |h^H w|^2 for every beam.
    std::vector<double> gains(std::span<const cplx> h) const;

private:
    int m_h_;
    int m_v_;
    std::vector<std::vector<cplx>> beams_;
};

} // namespace risplan
