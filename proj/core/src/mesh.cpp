#include "facecap/mesh.hpp"

#include "facecap/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace facecap {

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
    const auto n = vertices_.size();
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        const Face& t = faces_[f];
        for (auto i : t)
            if (i >= n)
                throw ValidationError("face " + std::to_string(f) + " references vertex " + std::to_string(i) +
                                      " but mesh has " + std::to_string(n) + " vertices");
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw ValidationError("face " + std::to_string(f) + " repeats a vertex");
    }
}

void TriMesh::set_attribute(const std::string& name, std::size_t width, std::vector<double> values) {
    if (width == 0) throw ValidationError("attribute '" + name + "' has zero width");
    if (values.size() != width * vertices_.size())
        throw ValidationError("attribute '" + name + "' needs " + std::to_string(width * vertices_.size()) +
                              " values, got " + std::to_string(values.size()));
    attributes_[name] = AttributeChannel{width, std::move(values)};
}

const AttributeChannel& TriMesh::attribute(const std::string& name) const {
    auto it = attributes_.find(name);
    if (it == attributes_.end()) throw ValidationError("unknown attribute channel '" + name + "'");
    return it->second;
}

TriMesh TriMesh::with_vertices(std::vector<Vec3> vertices) const {
    if (vertices.size() != vertices_.size())
        throw ValidationError("with_vertices: vertex count " + std::to_string(vertices.size()) + " != " +
                              std::to_string(vertices_.size()));
    TriMesh out = *this;
    out.vertices_ = std::move(vertices);
    return out;
}

double bary_mix(double a, double b, double c, const std::array<double, 3>& w) {
    const double v[3] = {a, b, c};
    std::size_t k = 0;
    if (w[1] > w[k]) k = 1;
    if (w[2] > w[k]) k = 2;
    if (w[k] == 1.0) return v[k];
    double out = v[k];
    for (std::size_t i = 0; i < 3; ++i)
        if (i != k) out += w[i] * (v[i] - v[k]);
    return out;
}

FaceNormals face_normals(const std::vector<Vec3>& vertices, const std::vector<Face>& faces) {
    FaceNormals out;
    out.normals.resize(faces.size());
    out.degenerate.resize(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& t = faces[f];
        const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
        const double len = n.norm();
        if (0.5 * len < kDegenerateArea) {
            out.normals[f] = Vec3::Zero();
            out.degenerate[f] = true;
        } else {
            out.normals[f] = n / len;
        }
    }
    return out;
}

FaceNormals face_normals(const TriMesh& mesh) { return face_normals(mesh.vertices(), mesh.faces()); }

VertexNormals vertex_normals(const std::vector<Vec3>& vertices, const std::vector<Face>& faces) {
    std::vector<Vec3> acc(vertices.size(), Vec3::Zero());
    for (const auto& t : faces) {
        // Unnormalized cross product: length is twice the area.
        const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
        for (auto i : t) acc[i] += n;
    }
    VertexNormals out;
    out.normals.resize(vertices.size());
    out.isolated.resize(vertices.size());
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        const double len = acc[v].norm();
        if (len > 0.0 && std::isfinite(len)) {
            out.normals[v] = acc[v] / len;
        } else {
            out.normals[v] = Vec3::UnitZ();
            out.isolated[v] = true;
        }
    }
    return out;
}

VertexNormals vertex_normals(const TriMesh& mesh) { return vertex_normals(mesh.vertices(), mesh.faces()); }

std::vector<std::vector<std::uint32_t>> vertex_neighbors(const TriMesh& mesh) {
    std::vector<std::vector<std::uint32_t>> ring(mesh.vertex_count());
    for (const auto& t : mesh.faces())
        for (int k = 0; k < 3; ++k) {
            ring[t[k]].push_back(t[(k + 1) % 3]);
            ring[t[k]].push_back(t[(k + 2) % 3]);
        }
    for (auto& r : ring) {
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
    }
    return ring;
}

std::vector<std::array<std::uint32_t, 2>> unique_edges(const TriMesh& mesh) {
    std::vector<std::array<std::uint32_t, 2>> edges;
    edges.reserve(mesh.face_count() * 3);
    for (const auto& t : mesh.faces())
        for (int k = 0; k < 3; ++k) {
            auto a = t[k], b = t[(k + 1) % 3];
            edges.push_back({std::min(a, b), std::max(a, b)});
        }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<std::array<std::uint32_t, 2>> face_adjacency(const TriMesh& mesh) {
    std::vector<std::array<std::uint32_t, 3>> keyed;  // lo, hi, face
    keyed.reserve(mesh.face_count() * 3);
    for (std::uint32_t f = 0; f < mesh.face_count(); ++f) {
        const auto& t = mesh.faces()[f];
        for (int k = 0; k < 3; ++k) {
            auto a = t[k], b = t[(k + 1) % 3];
            keyed.push_back({std::min(a, b), std::max(a, b), f});
        }
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::array<std::uint32_t, 2>> pairs;
    for (std::size_t i = 0; i < keyed.size();) {
        std::size_t j = i;
        while (j < keyed.size() && keyed[j][0] == keyed[i][0] && keyed[j][1] == keyed[i][1]) ++j;
        for (std::size_t a = i; a < j; ++a)
            for (std::size_t b = a + 1; b < j; ++b) pairs.push_back({keyed[a][2], keyed[b][2]});
        i = j;
    }
    return pairs;
}

long euler_characteristic(const TriMesh& mesh) {
    return static_cast<long>(mesh.vertex_count()) - static_cast<long>(unique_edges(mesh).size()) +
           static_cast<long>(mesh.face_count());
}

Eigen::MatrixXd uniform_laplacian(const TriMesh& mesh, const Eigen::MatrixXd& values) {
    if (static_cast<std::size_t>(values.rows()) != mesh.vertex_count())
        throw ValidationError("uniform_laplacian: " + std::to_string(values.rows()) + " rows for " +
                              std::to_string(mesh.vertex_count()) + " vertices");
    const auto ring = vertex_neighbors(mesh);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(values.rows(), values.cols());
    for (std::size_t v = 0; v < ring.size(); ++v) {
        if (ring[v].empty()) continue;
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(values.cols());
        for (auto u : ring[v]) mean += values.row(u);
        mean /= static_cast<double>(ring[v].size());
        out.row(v) = mean - values.row(v);
    }
    return out;
}

// Region-based closest point on a triangle (Ericson, Real-Time Collision
// Detection, 5.1.5). Vertex and edge regions produce exact zero weights.
std::array<double, 3> closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return {1.0, 0.0, 0.0};

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return {0.0, 1.0, 0.0};

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return {1.0 - v, v, 0.0};
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return {0.0, 0.0, 1.0};

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return {1.0 - w, 0.0, w};
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {0.0, 1.0 - w, w};
    }

    const double denom = va + vb + vc;
    if (!(std::abs(denom) > 0.0)) {
        // Degenerate (zero-area) triangle that fell through: fall back to the nearest corner.
        const double da = (p - a).squaredNorm(), db = (p - b).squaredNorm(), dc = (p - c).squaredNorm();
        if (da <= db && da <= dc) return {1.0, 0.0, 0.0};
        if (db <= dc) return {0.0, 1.0, 0.0};
        return {0.0, 0.0, 1.0};
    }
    const double v = vb / denom, w = vc / denom;
    return {1.0 - v - w, v, w};
}

Vec3 bary_point(const std::vector<Vec3>& vertices, const std::vector<Face>& faces, const BaryCoord& at) {
    const Face& t = faces.at(at.face);
    Vec3 out;
    for (int d = 0; d < 3; ++d)
        out[d] = bary_mix(vertices[t[0]][d], vertices[t[1]][d], vertices[t[2]][d], at.weights);
    return out;
}

ClosestPoint closest_point(const TriMesh& mesh, const Vec3& query) {
    if (mesh.face_count() == 0) throw ValidationError("closest_point: mesh has no faces");
    ClosestPoint best;
    double best_d2 = std::numeric_limits<double>::infinity();
    const auto& V = mesh.vertices();
    for (std::uint32_t f = 0; f < mesh.face_count(); ++f) {
        const Face& t = mesh.faces()[f];
        const auto w = closest_point_on_triangle(query, V[t[0]], V[t[1]], V[t[2]]);
        const Vec3 q = w[0] * V[t[0]] + w[1] * V[t[1]] + w[2] * V[t[2]];
        const double d2 = (q - query).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best.where = BaryCoord{f, w};
            best.point = q;
        }
    }
    best.distance = std::sqrt(best_d2);
    return best;
}

Eigen::VectorXd bary_interpolate_rows(const Eigen::MatrixXd& table, const Face& face, const std::array<double, 3>& w) {
    Eigen::VectorXd out(table.cols());
    for (Eigen::Index j = 0; j < table.cols(); ++j)
        out[j] = bary_mix(table(face[0], j), table(face[1], j), table(face[2], j), w);
    return out;
}

Eigen::VectorXd bary_interpolate(const TriMesh& mesh, const std::string& channel, const BaryCoord& at) {
    const AttributeChannel& ch = mesh.attribute(channel);
    if (at.face >= mesh.face_count())
        throw ValidationError("bary_interpolate: face " + std::to_string(at.face) + " out of range");
    const Face& t = mesh.faces()[at.face];
    Eigen::VectorXd out(static_cast<Eigen::Index>(ch.width));
    for (std::size_t j = 0; j < ch.width; ++j)
        out[static_cast<Eigen::Index>(j)] = bary_mix(ch.values[t[0] * ch.width + j], ch.values[t[1] * ch.width + j],
                                                     ch.values[t[2] * ch.width + j], at.weights);
    return out;
}

TriMesh make_icosphere(int subdivisions, double radius) {
    const double g = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> V = {{-1, g, 0}, {1, g, 0},  {-1, -g, 0}, {1, -g, 0}, {0, -1, g},  {0, 1, g},
                           {0, -1, -g}, {0, 1, -g}, {g, 0, -1},  {g, 0, 1},  {-g, 0, -1}, {-g, 0, 1}};
    std::vector<Face> F = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                           {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                           {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (auto& v : V) v.normalize();
    for (int s = 0; s < subdivisions; ++s) {
        std::unordered_map<std::uint64_t, std::uint32_t> mid;
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            const std::uint64_t key = (std::uint64_t(std::min(a, b)) << 32) | std::max(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            V.push_back((V[a] + V[b]).normalized());
            const auto idx = static_cast<std::uint32_t>(V.size() - 1);
            mid.emplace(key, idx);
            return idx;
        };
        std::vector<Face> next;
        next.reserve(F.size() * 4);
        for (const auto& t : F) {
            const auto ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        F = std::move(next);
    }
    for (auto& v : V) v *= radius;
    return TriMesh(std::move(V), std::move(F));
}

} // namespace facecap
