// SPDX-License-Identifier: Apache-2.0
//
// Small programmatic scenes shared by the unit tests.

#pragma once

#include "risplan/scene.hpp"

#include <vector>

namespace risplan::testing {

inline Material concrete(double scatter_s = 0.0)
{
    return {"concrete", 5.31, 0.139, scatter_s};
}

inline Building box_building(std::string id, double x0, double y0, double x1, double y1, double h,
                             std::string material = "concrete")
{
    return {std::move(id), {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, h, std::move(material), std::nullopt};
}

inline Scene open_scene(double half = 1000.0)
{
    return Scene({concrete()}, {}, Box2{{-half, -half}, {half, half}}, std::nullopt);
}

/// A long, tall slab whose south face lies on y = y_face.
inline Scene single_wall(const Material& m = concrete(), double y_face = 20.0)
{
    std::vector<Building> b{box_building("wall", -900.0, y_face, 900.0, y_face + 1.0, 400.0, m.id)};
    return Scene({m}, std::move(b), Box2{{-1000.0, -1000.0}, {1000.0, 1000.0}}, std::nullopt);
}

inline Scene single_box()
{
    std::vector<Building> b{box_building("b0", 0.0, 0.0, 10.0, 10.0, 20.0)};
    return Scene({concrete()}, std::move(b), Box2{{-50.0, -50.0}, {50.0, 50.0}}, std::nullopt);
}

} // namespace risplan::testing
