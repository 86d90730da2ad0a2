#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace facecap {

using Vec3 = Eigen::Vector3d;
using Face = std::array<std::uint32_t, 3>;

/// Named per-vertex attribute: `width` reals per vertex, vertex-major.
struct AttributeChannel {
    std::size_t width = 0;
    std::vector<double> values;
};

/// Indexed triangle mesh. Construction validates indices; after that the
/// mesh is treated as a value and never mutated behind a caller's back.
class TriMesh {
public:
    TriMesh() = default;
    TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces);

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Face>& faces() const { return faces_; }
    std::size_t vertex_count() const { return vertices_.size(); }
    std::size_t face_count() const { return faces_.size(); }

    void set_attribute(const std::string& name, std::size_t width, std::vector<double> values);
    bool has_attribute(const std::string& name) const { return attributes_.count(name) != 0; }
    const AttributeChannel& attribute(const std::string& name) const;
    const std::map<std::string, AttributeChannel>& attributes() const { return attributes_; }

    /// Same topology and attributes, new positions.
    TriMesh with_vertices(std::vector<Vec3> vertices) const;

private:
    std::vector<Vec3> vertices_;
    std::vector<Face> faces_;
    std::map<std::string, AttributeChannel> attributes_;
};

/// A point on a mesh face. Weights are nonnegative and sum to one.
struct BaryCoord {
    std::uint32_t face = 0;
    std::array<double, 3> weights{1.0, 0.0, 0.0};
};

/// Barycentric blend of three scalars. A weight of exactly one returns that
/// corner verbatim, and the blend is anchored on the heaviest corner, so
/// constant inputs come back bit-for-bit.
double bary_mix(double a, double b, double c, const std::array<double, 3>& w);

struct FaceNormals {
    std::vector<Vec3> normals;
    std::vector<bool> degenerate;  // area < 1e-12; normal is zero
};

struct VertexNormals {
    std::vector<Vec3> normals;
    std::vector<bool> isolated;  // no incident area; normal is (0,0,1)
};

inline constexpr double kDegenerateArea = 1e-12;

FaceNormals face_normals(const TriMesh& mesh);
FaceNormals face_normals(const std::vector<Vec3>& vertices, const std::vector<Face>& faces);
VertexNormals vertex_normals(const TriMesh& mesh);
VertexNormals vertex_normals(const std::vector<Vec3>& vertices, const std::vector<Face>& faces);

/// Sorted, de-duplicated one-ring of every vertex.
std::vector<std::vector<std::uint32_t>> vertex_neighbors(const TriMesh& mesh);

/// Unique undirected edges, each as (lo, hi), sorted.
std::vector<std::array<std::uint32_t, 2>> unique_edges(const TriMesh& mesh);

/// Pairs of faces sharing an edge.
std::vector<std::array<std::uint32_t, 2>> face_adjacency(const TriMesh& mesh);

/// V - E + F.
long euler_characteristic(const TriMesh& mesh);

/// Uniform graph Laplacian: neighbour mean minus own value, one row per
/// vertex. Vertices without neighbours map to zero.
Eigen::MatrixXd uniform_laplacian(const TriMesh& mesh, const Eigen::MatrixXd& values);

struct ClosestPoint {
    BaryCoord where;
    Vec3 point = Vec3::Zero();
    double distance = 0.0;
};

/// Closest point of a single triangle to `p`; returns barycentric weights.
std::array<double, 3> closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Global closest point over all faces (brute force); ties go to the lowest face index.
ClosestPoint closest_point(const TriMesh& mesh, const Vec3& query);

/// Point at a barycentric location.
Vec3 bary_point(const std::vector<Vec3>& vertices, const std::vector<Face>& faces, const BaryCoord& at);

/// Blends a named attribute channel at a barycentric location.
Eigen::VectorXd bary_interpolate(const TriMesh& mesh, const std::string& channel, const BaryCoord& at);

/// Blends rows of a vertex-major table (rows = vertices).
Eigen::VectorXd bary_interpolate_rows(const Eigen::MatrixXd& table, const Face& face, const std::array<double, 3>& w);

/// Subdivided icosahedron projected to the sphere (level 0 = 12 vertices,
/// level 3 = 642 vertices). Faces wind counter-clockwise seen from outside.
TriMesh make_icosphere(int subdivisions, double radius = 1.0);

} // namespace facecap
