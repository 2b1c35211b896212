#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mvir/array.h"
#include "mvir/camera.h"
#include "mvir/parallel.h"

namespace mvir {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;

    // Drops faces with repeated vertex indices (zero area by construction).
    void remove_degenerate_faces();
    void transform_to_world(const SceneTransform& t) {
        for (auto& v : vertices)
            v = t.to_world(v);
    }
};

// Extracts the zero isosurface of `field` sampled on a resolution^3 cell grid
// spanning [-1,1]^3, with linear interpolation along cell edges and welded
// vertices. `field` is called with a batch of points (n x 3) and must fill n
// values. Throws "no zero crossing" if the surface is empty.
TriangleMesh marching_cubes(const std::function<void(const double*, int, double*)>& field,
                            int resolution, Exec exec = Exec::openmp);

void write_obj(const std::string& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const std::string& path);

// First intersection of a ray with the mesh (brute force over triangles).
// Returns t >= 0 or a negative value for a miss.
double ray_mesh_hit(const TriangleMesh& mesh, const Vec3& origin, const Vec3& dir);

} // namespace mvir
