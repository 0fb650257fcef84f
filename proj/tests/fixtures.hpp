#pragma once

// Hand-built scenes and small helpers shared by the unit tests.

#include <string>
#include <vector>

#include "pano_nav/scenegen.hpp"
#include "pano_nav/vocab.hpp"
#include "pano_nav/world.hpp"

namespace fixtures {

using namespace pano_nav;

inline ObjectClass cls(const std::string& name) { return *ClassVocabulary().find(name); }

inline Scene open_scene(int w, int h) {
    Scene s;
    s.gridWidth = w;
    s.gridHeight = h;
    return s;
}

/// Object of class `name` resting on the floor of `cell` (tall receptacle
/// extents for receptacles that are not pickable).
inline SceneObject floor_object(const Scene& s, int id, const std::string& name, Cell cell, bool receptacle,
                                bool pickable) {
    SceneObject o;
    o.objectId = id;
    o.cls = cls(name);
    o.extent = receptacle && !pickable ? Vec3{0.1, 0.1, 0.5} : Vec3{0.03, 0.03, 0.03};
    o.center = cell_center(s, cell);
    o.center.z = o.extent.z;
    o.isReceptacle = receptacle;
    o.isPickable = pickable;
    return o;
}

/// Object resting on top of `base`.
inline SceneObject object_on(const SceneObject& base, int id, const std::string& name, Vec3 extent, bool receptacle,
                             double dx = 0.0, double dy = 0.0) {
    SceneObject o;
    o.objectId = id;
    o.cls = cls(name);
    o.extent = extent;
    o.center = {base.center.x + dx, base.center.y + dy, base.center.z + base.extent.z + extent.z};
    o.isReceptacle = receptacle;
    o.isPickable = true;
    o.state.placedOn = base.objectId;
    return o;
}

/// 5x5 open kitchen: counter (id 0) at (2,2) holding a knife (1) and a
/// bowl (2); a table (3) at (0,4); an apple (4) on the table.
inline Scene kitchen() {
    Scene s = open_scene(5, 5);
    const auto counter = floor_object(s, 0, "counter", {2, 2}, true, false);
    s.objects.push_back(counter);
    s.objects.push_back(object_on(counter, 1, "knife", {0.03, 0.03, 0.03}, false, -0.05, -0.05));
    s.objects.push_back(object_on(counter, 2, "bowl", {0.05, 0.05, 0.04}, true, 0.05, 0.05));
    const auto table = floor_object(s, 3, "table", {0, 4}, true, false);
    s.objects.push_back(table);
    s.objects.push_back(object_on(table, 4, "apple", {0.03, 0.03, 0.03}, false));
    return s;
}

/// Generated (scene, task, expert) for seed `s` with default parameters.
struct Generated {
    Scene scene;
    Task task;
    Trajectory expert;
};

inline Generated generated(std::uint64_t seed, GenParams params = {}) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        params.seed = hash_combine(seed, attempt);
        try {
            Generated g;
            g.scene = generate_scene(params);
            g.task = generate_task(g.scene, seed);
            g.expert = plan_expert(g.scene, g.task);
            return g;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::GenerationFailed && e.kind() != ErrorKind::InfeasibleTask) throw;
        }
    }
}

} // namespace fixtures
