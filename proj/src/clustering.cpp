// SPDX-License-Identifier: Apache-2.0

#include "risplan/clustering.hpp"

#include "risplan/coverage.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

namespace risplan {

Vec2 ClusteringFeature::centroid() const
{
    if (count <= 0) {
        throw PreconditionError("centroid of an empty clustering feature");
    }
    return linear_sum * (1.0 / static_cast<double>(count));
}

double ClusteringFeature::radius() const
{
    const Vec2 c = centroid();
    return std::sqrt(std::max(0.0, square_sum / static_cast<double>(count) - dot(c, c)));
}

void ClusteringFeature::validate() const
{
    if (count < 1) {
        throw InvariantError("clustering feature must count at least one point");
    }
    const double lower = dot(linear_sum, linear_sum) / static_cast<double>(count);
    if (square_sum < lower - 1e-9 * std::max(1.0, lower)) {
        throw InvariantError("clustering feature violates square_sum >= |linear_sum|^2 / count");
    }
}

ClusteringFeature cf_merge(const ClusteringFeature& a, const ClusteringFeature& b)
{
    return {a.count + b.count, a.linear_sum + b.linear_sum, a.square_sum + b.square_sum};
}

namespace {

struct Node;

struct Entry {
    ClusteringFeature cf;
    std::unique_ptr<Node> child; // internal nodes only
    int cluster = -1;            // leaf entries only
};

struct Node {
    bool leaf = true;
    std::vector<Entry> entries;
};

double dist2(const Vec2& a, const Vec2& b)
{
    const Vec2 d = a - b;
    return dot(d, d);
}

std::size_t closest_entry(const Node& n, const Vec2& p)
{
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n.entries.size(); ++i) {
        const double d = dist2(n.entries[i].cf.centroid(), p);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

ClusteringFeature node_cf(const Node& n)
{
    ClusteringFeature cf;
    for (const auto& e : n.entries) {
        cf = cf_merge(cf, e.cf);
    }
    return cf;
}

// Splits an overflowing node around its two farthest entries.
std::pair<Entry, Entry> split(std::unique_ptr<Node> node)
{
    auto& es = node->entries;
    std::size_t s1 = 0;
    std::size_t s2 = 1;
    double far = -1.0;
    for (std::size_t i = 0; i < es.size(); ++i) {
        for (std::size_t j = i + 1; j < es.size(); ++j) {
            const double d = dist2(es[i].cf.centroid(), es[j].cf.centroid());
            if (d > far) {
                far = d;
                s1 = i;
                s2 = j;
            }
        }
    }
    auto a = std::make_unique<Node>();
    auto b = std::make_unique<Node>();
    a->leaf = b->leaf = node->leaf;
    const Vec2 c1 = es[s1].cf.centroid();
    const Vec2 c2 = es[s2].cf.centroid();
    for (std::size_t i = 0; i < es.size(); ++i) {
        const bool to_a = i == s1 || (i != s2 && dist2(es[i].cf.centroid(), c1) <= dist2(es[i].cf.centroid(), c2));
        (to_a ? a : b)->entries.push_back(std::move(es[i]));
    }
    Entry ea;
    ea.cf = node_cf(*a);
    ea.child = std::move(a);
    Entry eb;
    eb.cf = node_cf(*b);
    eb.child = std::move(b);
    return {std::move(ea), std::move(eb)};
}

class CfTree {
public:
    CfTree(double threshold, int branching) : limit_(threshold / 2.0), branching_(branching)
    {
        root_ = std::make_unique<Node>();
    }

    void insert(const Vec2& p, std::size_t index)
    {
        insert_into(*root_, p, index);
        if (static_cast<int>(root_->entries.size()) > branching_) {
            auto [a, b] = split(std::move(root_));
            root_ = std::make_unique<Node>();
            root_->leaf = false;
            root_->entries.push_back(std::move(a));
            root_->entries.push_back(std::move(b));
        }
    }

    std::vector<Cluster> take()
    {
        for (std::size_t i = 0; i < clusters_.size(); ++i) {
            clusters_[i].id = static_cast<int>(i);
        }
        return std::move(clusters_);
    }

private:
    void insert_into(Node& n, const Vec2& p, std::size_t index)
    {
        const ClusteringFeature pcf = ClusteringFeature::of(p);
        if (n.leaf) {
            if (!n.entries.empty()) {
                Entry& e = n.entries[closest_entry(n, p)];
                const ClusteringFeature merged = cf_merge(e.cf, pcf);
                if (merged.radius() <= limit_) {
                    e.cf = merged;
                    clusters_[static_cast<std::size_t>(e.cluster)].cf = merged;
                    clusters_[static_cast<std::size_t>(e.cluster)].members.push_back(index);
                    return;
                }
            }
            Entry e;
            e.cf = pcf;
            e.cluster = static_cast<int>(clusters_.size());
            clusters_.push_back({0, pcf, {index}});
            n.entries.push_back(std::move(e));
            return;
        }
        const std::size_t k = closest_entry(n, p);
        insert_into(*n.entries[k].child, p, index);
        n.entries[k].cf = cf_merge(n.entries[k].cf, pcf);
        if (static_cast<int>(n.entries[k].child->entries.size()) > branching_) {
            auto [a, b] = split(std::move(n.entries[k].child));
            n.entries[k] = std::move(a);
            n.entries.insert(n.entries.begin() + static_cast<std::ptrdiff_t>(k) + 1, std::move(b));
        }
    }

    double limit_;
    int branching_;
    std::unique_ptr<Node> root_;
    std::vector<Cluster> clusters_;
};

} // namespace

std::vector<std::size_t> canonical_order(std::span<const Vec2> points)
{
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::pair{points[a].x, points[a].y} < std::pair{points[b].x, points[b].y};
    });
    return order;
}

std::vector<Cluster> birch_cluster(std::span<const Vec2> points, double threshold_t, int branching)
{
    if (!(threshold_t > 0.0) || branching < 2) {
        throw PreconditionError("birch_cluster: threshold must be > 0 and branching >= 2");
    }
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw PreconditionError("birch_cluster: non-finite coordinates");
        }
    }
    CfTree tree(threshold_t, branching);
    for (std::size_t i : canonical_order(points)) {
        tree.insert(points[i], i);
    }
    return tree.take();
}

Vec3 cluster_centroid(const Cluster& c, double ue_height)
{
    const Vec2 m = c.centroid();
    return {m.x, m.y, ue_height};
}

void write_clusters_csv(std::span<const Cluster> clusters, std::ostream& out)
{
    out << "cluster_id,centroid_x,centroid_y,size\n";
    for (const auto& c : clusters) {
        const Vec2 m = c.centroid();
        out << c.id << ',' << format_number(m.x, 3) << ',' << format_number(m.y, 3) << ',' << c.cf.count << '\n';
    }
}

void write_membership_csv(std::span<const Cluster> clusters, std::span<const std::size_t> tiles, const TileGrid& grid,
                          std::ostream& out)
{
    std::vector<int> owner(tiles.size(), -1);
    for (const auto& c : clusters) {
        for (std::size_t m : c.members) {
            owner.at(m) = c.id;
        }
    }
    out << "tile_row,tile_col,cluster_id\n";
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        out << grid.row_of(tiles[i]) << ',' << grid.col_of(tiles[i]) << ',' << owner[i] << '\n';
    }
}

} // namespace risplan
