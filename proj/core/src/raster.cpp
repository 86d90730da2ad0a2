#include "facecap/raster.hpp"

#include "facecap/errors.hpp"
#include "facecap/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace facecap {

GBuffer::GBuffer(int w, int h) : width(w), height(h) {
    const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    face.assign(n, kNoFace);
    bary.assign(n, {0.0, 0.0, 0.0});
    depth.assign(n, std::numeric_limits<double>::infinity());
}

std::size_t GBuffer::covered_count() const {
    return static_cast<std::size_t>(std::count_if(face.begin(), face.end(), [](auto f) { return f != kNoFace; }));
}

namespace {

struct Edge {
    double ax, ay, dx, dy;  // start point and direction of the lower-index to higher-index edge
    double sign;            // orientation factor making the interior positive
    bool owns_zero;         // pixel centres exactly on the edge belong to this triangle

    double eval(double px, double py) const { return sign * (dx * (py - ay) - dy * (px - ax)); }
};

struct TriSetup {
    bool valid = false;
    Edge edge[3];  // edge i is opposite corner i
    double z[3];
    int x0, x1, y0, y1;
};

TriSetup setup_triangle(const Face& f, const std::vector<Projected>& p, bool cull, int width, int height) {
    TriSetup s;
    for (int i = 0; i < 3; ++i)
        if (!p[f[i]].in_front) return s;
    const Projected& a = p[f[0]];
    const Projected& b = p[f[1]];
    const Projected& c = p[f[2]];
    const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    // Counter-clockwise in a y-down image has negative signed area.
    if (area == 0.0 || !std::isfinite(area) || (cull && area > 0.0)) return s;
    const double orient = area < 0.0 ? -1.0 : 1.0;

    for (int i = 0; i < 3; ++i) {
        const std::uint32_t j = f[(i + 1) % 3], k = f[(i + 2) % 3];
        const std::uint32_t lo = std::min(j, k), hi = std::max(j, k);
        Edge& e = s.edge[i];
        // Evaluating every shared edge from its lower vertex index makes the two
        // neighbouring triangles see bitwise-opposite values.
        e.ax = p[lo].x;
        e.ay = p[lo].y;
        e.dx = p[hi].x - p[lo].x;
        e.dy = p[hi].y - p[lo].y;
        e.sign = orient * (j == lo ? 1.0 : -1.0);
        const double gx = -e.sign * e.dy, gy = e.sign * e.dx;  // inward gradient
        e.owns_zero = gx > 0.0 || (gx == 0.0 && gy > 0.0);
    }
    for (int i = 0; i < 3; ++i) s.z[i] = p[f[i]].depth;

    const double minx = std::min({a.x, b.x, c.x}), maxx = std::max({a.x, b.x, c.x});
    const double miny = std::min({a.y, b.y, c.y}), maxy = std::max({a.y, b.y, c.y});
    s.x0 = static_cast<int>(std::max(0.0, std::ceil(minx - 0.5)));
    s.y0 = static_cast<int>(std::max(0.0, std::ceil(miny - 0.5)));
    s.x1 = static_cast<int>(std::min(double(width - 1), std::floor(maxx - 0.5)));
    s.y1 = static_cast<int>(std::min(double(height - 1), std::floor(maxy - 0.5)));
    s.valid = s.x0 <= s.x1 && s.y0 <= s.y1;
    return s;
}

} // namespace

GBuffer rasterize(const std::vector<Face>& faces, const std::vector<Vec3>& vertices, const Camera& cam, int width,
                  int height, const RasterOptions& options) {
    if (width <= 0 || height <= 0) throw ValidationError("rasterize: image size must be positive");
    if (options.tile <= 0) throw ValidationError("rasterize: tile size must be positive");
    for (const Face& f : faces)
        for (auto v : f)
            if (v >= vertices.size()) throw ValidationError("rasterize: face references a missing vertex");
    cam.validate();

    const auto projected = project(cam, vertices, width, height);
    std::vector<TriSetup> tris(faces.size());
    for (std::size_t t = 0; t < faces.size(); ++t)
        tris[t] = setup_triangle(faces[t], projected, options.cull_backfaces, width, height);

    GBuffer g(width, height);
    const bool perspective = cam.mode == CameraMode::Perspective;
    const int tiles_x = (width + options.tile - 1) / options.tile;
    const int tiles_y = (height + options.tile - 1) / options.tile;
    parallel_for(static_cast<std::size_t>(tiles_x) * static_cast<std::size_t>(tiles_y), options.threads, [&](std::size_t tile) {
        const int tx0 = static_cast<int>(tile % static_cast<std::size_t>(tiles_x)) * options.tile;
        const int ty0 = static_cast<int>(tile / static_cast<std::size_t>(tiles_x)) * options.tile;
        const int tx1 = std::min(width, tx0 + options.tile) - 1;
        const int ty1 = std::min(height, ty0 + options.tile) - 1;
        for (std::size_t t = 0; t < tris.size(); ++t) {
            const TriSetup& s = tris[t];
            if (!s.valid || s.x1 < tx0 || s.x0 > tx1 || s.y1 < ty0 || s.y0 > ty1) continue;
            const auto id = static_cast<std::uint32_t>(t);
            for (int y = std::max(s.y0, ty0); y <= std::min(s.y1, ty1); ++y) {
                const double py = y + 0.5;
                for (int x = std::max(s.x0, tx0); x <= std::min(s.x1, tx1); ++x) {
                    const double px = x + 0.5;
                    double e[3];
                    bool inside = true;
                    for (int i = 0; i < 3 && inside; ++i) {
                        e[i] = s.edge[i].eval(px, py);
                        inside = e[i] > 0.0 || (e[i] == 0.0 && s.edge[i].owns_zero);
                    }
                    if (!inside) continue;
                    const double sum = e[0] + e[1] + e[2];
                    if (!(sum > 0.0)) continue;
                    std::array<double, 3> w{e[0] / sum, e[1] / sum, e[2] / sum};
                    double depth;
                    if (perspective) {
                        const double q[3] = {w[0] / s.z[0], w[1] / s.z[1], w[2] / s.z[2]};
                        const double inv = q[0] + q[1] + q[2];
                        depth = 1.0 / inv;
                        w = {q[0] / inv, q[1] / inv, q[2] / inv};
                    } else {
                        depth = w[0] * s.z[0] + w[1] * s.z[1] + w[2] * s.z[2];
                    }
                    const std::size_t i = g.index(x, y);
                    const bool wins = g.face[i] == kNoFace || depth < g.depth[i] - kDepthTie ||
                                      (std::abs(depth - g.depth[i]) <= kDepthTie && id < g.face[i]);
                    if (!wins) continue;
                    g.face[i] = id;
                    g.depth[i] = depth;
                    g.bary[i] = w;
                }
            }
        }
    });
    return g;
}

ImageU8 render_semantic(const GBuffer& g, const std::vector<Face>& faces, const SemanticAnnotation& ann) {
    if (ann.classes.size() > kHairLabel) throw ValidationError("too many semantic classes for an 8-bit class map");
    for (const Face& f : faces)
        for (auto v : f)
            if (v >= ann.labels.size()) throw ValidationError("render_semantic: annotation does not cover the mesh");
    ImageU8 out(g.width, g.height, 1, kBackgroundLabel);
    const std::size_t nclass = ann.classes.size();
    std::vector<double> score(nclass);
    for (std::size_t i = 0; i < g.face.size(); ++i) {
        if (!g.covered(i)) continue;
        if (g.face[i] >= faces.size()) throw ValidationError("render_semantic: GBuffer does not match the faces");
        const Face& f = faces[g.face[i]];
        std::fill(score.begin(), score.end(), 0.0);
        for (int c = 0; c < 3; ++c) {
            const auto label = ann.labels[f[c]];
            if (label >= nclass) throw ValidationError("render_semantic: label out of range");
            score[label] += g.bary[i][c];
        }
        std::size_t best = 0;
        for (std::size_t k = 1; k < nclass; ++k)
            if (score[k] > score[best] + 1e-12) best = k;
        out.data[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

namespace {

Vec3 interpolated_normal(const std::vector<Vec3>& normals, const Face& f, const std::array<double, 3>& w) {
    const Vec3 n = w[0] * normals[f[0]] + w[1] * normals[f[1]] + w[2] * normals[f[2]];
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3(0.0, 0.0, 1.0);
}

void check_gbuffer(const GBuffer& g, const std::vector<Face>& faces) {
    for (auto f : g.face)
        if (f != kNoFace && f >= faces.size()) throw ValidationError("GBuffer does not match the faces");
}

} // namespace

ImageF render_shaded(const GBuffer& g, const std::vector<Face>& faces, const std::vector<Vec3>& vertices,
                     const std::vector<MaterialSample>& materials, const LightEvaluator& light, std::size_t video,
                     const Camera& cam, unsigned threads) {
    check_gbuffer(g, faces);
    if (materials.size() != vertices.size()) throw ValidationError("render_shaded: one material per vertex required");
    light.diffuse_net(video);  // range check before any work
    const auto normals = vertex_normals(vertices, faces).normals;
    ImageF out(g.width, g.height, 3, 0.0f);

    parallel_for(static_cast<std::size_t>(g.height), threads, [&](std::size_t row) {
        std::vector<std::size_t> pixels;
        for (int x = 0; x < g.width; ++x) {
            const std::size_t i = g.index(x, static_cast<int>(row));
            if (g.covered(i)) pixels.push_back(i);
        }
        if (pixels.empty()) return;
        const auto n = static_cast<Eigen::Index>(pixels.size());
        Eigen::MatrixXd diffuse_in(static_cast<Eigen::Index>(kLightInputWidth), n);
        Eigen::MatrixXd specular_in(static_cast<Eigen::Index>(kLightInputWidth), n);
        std::vector<MaterialSample> mats(pixels.size());
        for (Eigen::Index k = 0; k < n; ++k) {
            const std::size_t i = pixels[static_cast<std::size_t>(k)];
            const Face& f = faces[g.face[i]];
            const auto& w = g.bary[i];
            const Vec3 p = w[0] * vertices[f[0]] + w[1] * vertices[f[1]] + w[2] * vertices[f[2]];
            const Vec3 nrm = interpolated_normal(normals, f, w);
            const MaterialSample& m0 = materials[f[0]];
            const MaterialSample& m1 = materials[f[1]];
            const MaterialSample& m2 = materials[f[2]];
            const MaterialSample m =
                make_material(w[0] * m0.albedo + w[1] * m1.albedo + w[2] * m2.albedo,
                              w[0] * m0.roughness + w[1] * m1.roughness + w[2] * m2.roughness,
                              w[0] * m0.specular + w[1] * m1.specular + w[2] * m2.specular);
            mats[static_cast<std::size_t>(k)] = m;
            diffuse_in.col(k) = light_features(nrm, 1.0);
            specular_in.col(k) = light_features(reflect(cam.view_direction(p), nrm), m.roughness);
        }
        const Eigen::MatrixXd ld = light.diffuse_net(video).forward(diffuse_in);
        const Eigen::MatrixXd ls = light.specular_net(video).forward(specular_in);
        for (Eigen::Index k = 0; k < n; ++k) {
            const Rgb c = shade(mats[static_cast<std::size_t>(k)], ld.col(k).array(), ls.col(k).array());
            const std::size_t i = pixels[static_cast<std::size_t>(k)];
            for (int ch = 0; ch < 3; ++ch) out.data[3 * i + static_cast<std::size_t>(ch)] = static_cast<float>(c[ch]);
        }
    });
    return out;
}

ImageF render_normals(const GBuffer& g, const std::vector<Face>& faces, const std::vector<Vec3>& vertices) {
    check_gbuffer(g, faces);
    const auto normals = vertex_normals(vertices, faces).normals;
    ImageF out(g.width, g.height, 3, 0.0f);
    for (std::size_t i = 0; i < g.face.size(); ++i) {
        if (!g.covered(i)) continue;
        const Vec3 n = interpolated_normal(normals, faces[g.face[i]], g.bary[i]);
        for (int c = 0; c < 3; ++c) out.data[3 * i + static_cast<std::size_t>(c)] = static_cast<float>(0.5 * (n[c] + 1.0));
    }
    return out;
}

ImageF render_depth(const GBuffer& g) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < g.face.size(); ++i)
        if (g.covered(i)) {
            lo = std::min(lo, g.depth[i]);
            hi = std::max(hi, g.depth[i]);
        }
    ImageF out(g.width, g.height, 1, 0.0f);
    for (std::size_t i = 0; i < g.face.size(); ++i)
        if (g.covered(i)) out.data[i] = hi > lo ? static_cast<float>(1.0 - (g.depth[i] - lo) / (hi - lo)) : 1.0f;
    return out;
}

ImageU8 coverage_mask(const GBuffer& g) {
    ImageU8 out(g.width, g.height, 1, 0);
    for (std::size_t i = 0; i < g.face.size(); ++i) out.data[i] = g.covered(i) ? 1 : 0;
    return out;
}

} // namespace facecap
