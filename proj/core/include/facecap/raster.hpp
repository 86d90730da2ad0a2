#pragma once

#include "facecap/appearance.hpp"
#include "facecap/camera.hpp"
#include "facecap/image.hpp"
#include "facecap/mesh.hpp"
#include "facecap/semantic.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace facecap {

inline constexpr std::uint32_t kNoFace = 0xFFFFFFFFu;
/// Depths closer than this count as equal; the lower face id wins.
inline constexpr double kDepthTie = 1e-12;

struct GBuffer {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> face;             // kNoFace on background
    std::vector<std::array<double, 3>> bary;     // meaningful only where covered
    std::vector<double> depth;                   // camera z; +inf on background

    GBuffer() = default;
    GBuffer(int w, int h);

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x); }
    bool covered(std::size_t i) const { return face[i] != kNoFace; }
    std::size_t covered_count() const;
};

struct RasterOptions {
    bool cull_backfaces = true;
    unsigned threads = 1;
    int tile = 32;
};

/// Pixel-centre sampling with a top-left style fill rule, nearest depth wins.
/// Front faces are counter-clockwise seen from the camera. Triangles with a
/// vertex at or behind the perspective camera plane are skipped (no clipping).
/// Barycentrics and depth are perspective-correct. The result does not depend
/// on the thread count or tile size.
GBuffer rasterize(const std::vector<Face>& faces, const std::vector<Vec3>& vertices, const Camera& cam, int width,
                  int height, const RasterOptions& options = {});

/// Class index per covered pixel: the class with the largest summed corner
/// weight (ties within 1e-12 go to the lower class index); kBackgroundLabel elsewhere.
ImageU8 render_semantic(const GBuffer& gbuf, const std::vector<Face>& faces, const SemanticAnnotation& annotation);

/// Deferred shading of per-vertex materials with the light networks of one
/// video. Linear radiance; background is 0.
ImageF render_shaded(const GBuffer& gbuf, const std::vector<Face>& faces, const std::vector<Vec3>& vertices,
                     const std::vector<MaterialSample>& materials, const LightEvaluator& light, std::size_t video,
                     const Camera& cam, unsigned threads = 1);

/// Interpolated vertex normal mapped to [0,1]^3; background 0.
ImageF render_normals(const GBuffer& gbuf, const std::vector<Face>& faces, const std::vector<Vec3>& vertices);
/// 1 at the nearest covered depth falling linearly to 0 at the farthest; background 0.
ImageF render_depth(const GBuffer& gbuf);
/// 1 where covered.
ImageU8 coverage_mask(const GBuffer& gbuf);

} // namespace facecap
