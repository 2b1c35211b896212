#include "mvir/mesh.h"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "mvir/error.h"

namespace mvir {

namespace {

#include "mc_tables.inc"

// Cube corner offsets, Bourke numbering: 0..3 bottom face CCW, 4..7 top.
const int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                           {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

// Edge -> (corner, corner).
const int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                          {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Canonical key for a cell edge: anchor vertex index plus axis.
uint64_t edge_key(int N1, int x, int y, int z, int axis) {
    uint64_t v = (static_cast<uint64_t>(z) * N1 + y) * N1 + x;
    return v * 3 + axis;
}

} // namespace

void TriangleMesh::remove_degenerate_faces() {
    std::vector<std::array<int, 3>> keep;
    keep.reserve(faces.size());
    for (const auto& f : faces)
        if (f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            keep.push_back(f);
    faces.swap(keep);
}

TriangleMesh marching_cubes(const std::function<void(const double*, int, double*)>& field,
                            int resolution, Exec exec) {
    check(resolution >= 2, "marching_cubes: resolution must be >= 2");
    const int N = resolution;
    const int N1 = N + 1;
    const double cell = 2.0 / N;

    // Field values at the (N+1)^3 grid corners, z-major slabs in parallel.
    std::vector<double> val(static_cast<size_t>(N1) * N1 * N1);
    parallel_for(N1, exec, [&](int z) {
        std::vector<double> pts(static_cast<size_t>(N1) * N1 * 3);
        for (int y = 0; y < N1; ++y)
            for (int x = 0; x < N1; ++x) {
                size_t i = (static_cast<size_t>(y) * N1 + x) * 3;
                pts[i + 0] = -1.0 + cell * x;
                pts[i + 1] = -1.0 + cell * y;
                pts[i + 2] = -1.0 + cell * z;
            }
        field(pts.data(), N1 * N1, val.data() + static_cast<size_t>(z) * N1 * N1);
    });

    auto value_at = [&](int x, int y, int z) {
        return val[(static_cast<size_t>(z) * N1 + y) * N1 + x];
    };
    auto point_at = [&](int x, int y, int z) {
        return Vec3{-1.0 + cell * x, -1.0 + cell * y, -1.0 + cell * z};
    };

    TriangleMesh mesh;
    std::unordered_map<uint64_t, int> edge_vertex;

    auto vertex_on_edge = [&](int cx, int cy, int cz, int e) {
        const int* a = kCorner[kEdge[e][0]];
        const int* b = kCorner[kEdge[e][1]];
        int ax = cx + a[0], ay = cy + a[1], az = cz + a[2];
        int bx = cx + b[0], by = cy + b[1], bz = cz + b[2];
        int axis = (ax != bx) ? 0 : (ay != by ? 1 : 2);
        // anchor at the lower corner along the edge axis
        int mx = std::min(ax, bx), my = std::min(ay, by), mz = std::min(az, bz);
        uint64_t key = edge_key(N1, mx, my, mz, axis);
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end())
            return it->second;
        double va = value_at(ax, ay, az);
        double vb = value_at(bx, by, bz);
        double t = (va - vb) != 0.0 ? va / (va - vb) : 0.5;
        t = std::clamp(t, 0.0, 1.0);
        Vec3 pa = point_at(ax, ay, az), pb = point_at(bx, by, bz);
        int idx = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(pa + (pb - pa) * t);
        edge_vertex.emplace(key, idx);
        return idx;
    };

    for (int z = 0; z < N; ++z)
        for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x) {
                int ci = 0;
                for (int c = 0; c < 8; ++c)
                    if (value_at(x + kCorner[c][0], y + kCorner[c][1], z + kCorner[c][2]) < 0.0)
                        ci |= 1 << c;
                if (ci == 0 || ci == 255)
                    continue;
                const int8_t* row = kTriTable[ci];
                for (int k = 0; row[k] != -1; k += 3) {
                    int v0 = vertex_on_edge(x, y, z, row[k]);
                    int v1 = vertex_on_edge(x, y, z, row[k + 1]);
                    int v2 = vertex_on_edge(x, y, z, row[k + 2]);
                    mesh.faces.push_back({v0, v1, v2});
                }
            }

    check(!mesh.faces.empty(), "no zero crossing: the field has no isosurface in [-1,1]^3");
    mesh.remove_degenerate_faces();
    return mesh;
}

void write_obj(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream f(path);
    check(f.good(), "cannot open '", path, "' for writing");
    f.precision(9);
    for (const auto& v : mesh.vertices)
        f << "v " << v.x << " " << v.y << " " << v.z << "\n";
    for (const auto& t : mesh.faces)
        f << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
    check(f.good(), "failed writing '", path, "'");
}

TriangleMesh read_obj(const std::string& path) {
    std::ifstream f(path);
    check(f.good(), "cannot open '", path, "'");
    TriangleMesh mesh;
    std::string line;
    while (std::getline(f, line)) {
        if (line.size() < 2)
            continue;
        std::istringstream is(line);
        std::string tag;
        is >> tag;
        if (tag == "v") {
            Vec3 v;
            is >> v.x >> v.y >> v.z;
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> face;
            for (int k = 0; k < 3; ++k) {
                std::string tok;
                is >> tok;
                // accept v, v/vt, v//vn forms
                face[k] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
            }
            mesh.faces.push_back(face);
        }
    }
    check(!mesh.vertices.empty(), "no vertices in '", path, "'");
    return mesh;
}

double ray_mesh_hit(const TriangleMesh& mesh, const Vec3& origin, const Vec3& dir) {
    double best = -1.0;
    for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3& b = mesh.vertices[f[1]];
        const Vec3& c = mesh.vertices[f[2]];
        Vec3 e1 = b - a, e2 = c - a;
        Vec3 p = cross(dir, e2);
        double det = dot(e1, p);
        if (std::abs(det) < 1e-14)
            continue;
        double inv = 1.0 / det;
        Vec3 s = origin - a;
        double u = dot(s, p) * inv;
        if (u < 0 || u > 1)
            continue;
        Vec3 q = cross(s, e1);
        double v = dot(dir, q) * inv;
        if (v < 0 || u + v > 1)
            continue;
        double t = dot(e2, q) * inv;
        if (t > 1e-9 && (best < 0 || t < best))
            best = t;
    }
    return best;
}

} // namespace mvir
