// SPDX-License-Identifier: Apache-2.0
//
// BIRCH clustering of outage tiles over a clustering-feature (CF) tree.

#pragma once

#include "risplan/geometry.hpp"
#include "risplan/scene.hpp"

#include <ostream>
#include <span>
#include <vector>

namespace risplan {

inline constexpr double kDefaultBirchThreshold = 15.0;
inline constexpr double kReclusterThreshold = 10.0;
inline constexpr int kDefaultBranching = 50;

struct ClusteringFeature {
    long count = 0;
    Vec2 linear_sum;
    double square_sum = 0.0;

    static ClusteringFeature of(const Vec2& p) { return {1, p, dot(p, p)}; }
    Vec2 centroid() const;
    /// RMS distance of the members from the centroid.
    double radius() const;
    void validate() const;
};

ClusteringFeature cf_merge(const ClusteringFeature& a, const ClusteringFeature& b);

struct Cluster {
    int id = 0;
    ClusteringFeature cf;
    std::vector<std::size_t> members; // indices into the clustered point list

    Vec2 centroid() const { return cf.centroid(); }
};

/// Deterministic BIRCH: points are inserted in (x, y) order; an entry absorbs a
/// point only while its radius stays <= threshold / 2. Clusters are the leaf
/// entries, numbered by their first member in insertion order.
std::vector<Cluster> birch_cluster(std::span<const Vec2> points, double threshold_t = kDefaultBirchThreshold,
                                   int branching = kDefaultBranching);

/// Centroid lifted to the UE height for ray queries.
Vec3 cluster_centroid(const Cluster& c, double ue_height);

/// Canonical insertion order used by birch_cluster.
std::vector<std::size_t> canonical_order(std::span<const Vec2> points);

void write_clusters_csv(std::span<const Cluster> clusters, std::ostream& out);

/// Membership rows `tile_row,tile_col,cluster_id`; `tiles[i]` is the grid index of point i.
void write_membership_csv(std::span<const Cluster> clusters, std::span<const std::size_t> tiles, const TileGrid& grid,
                          std::ostream& out);

} // namespace risplan
