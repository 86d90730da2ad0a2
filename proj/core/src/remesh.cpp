#include "facecap/remesh.hpp"

#include "facecap/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace facecap {

namespace {

using Edge = std::array<std::uint32_t, 2>;

void check_manifold(const TriMesh& mesh) {
    std::map<Edge, int> directed;
    std::map<Edge, int> undirected;
    for (const Face& f : mesh.faces())
        for (int i = 0; i < 3; ++i) {
            const auto a = f[static_cast<std::size_t>(i)], b = f[static_cast<std::size_t>((i + 1) % 3)];
            if (++directed[{a, b}] > 1)
                throw ValidationError("remesh: edge (" + std::to_string(a) + ", " + std::to_string(b) +
                                      ") is used twice in the same direction (non-manifold or inconsistent orientation)");
            if (++undirected[{std::min(a, b), std::max(a, b)}] > 2)
                throw ValidationError("remesh: edge (" + std::to_string(std::min(a, b)) + ", " +
                                      std::to_string(std::max(a, b)) + ") is shared by more than two faces");
        }
}

Vec3 tri_normal(const Vec3& a, const Vec3& b, const Vec3& c) { return (b - a).cross(c - a); }

class WorkMesh {
public:
    explicit WorkMesh(const TriMesh& m) : pos_(m.vertices()), faces_(m.faces()) {
        vdead_.assign(pos_.size(), false);
        fdead_.assign(faces_.size(), false);
        vf_.resize(pos_.size());
        for (std::uint32_t f = 0; f < faces_.size(); ++f)
            for (auto v : faces_[f]) vf_[v].push_back(f);
        fixed_.assign(pos_.size(), false);
        for (const auto& e : edges())
            if (edge_faces(e[0], e[1]).size() == 1) fixed_[e[0]] = fixed_[e[1]] = true;
        alive_vertices_ = pos_.size();
    }

    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (std::uint32_t f = 0; f < faces_.size(); ++f) {
            if (fdead_[f]) continue;
            for (int i = 0; i < 3; ++i) {
                const auto a = faces_[f][static_cast<std::size_t>(i)], b = faces_[f][static_cast<std::size_t>((i + 1) % 3)];
                out.push_back({std::min(a, b), std::max(a, b)});
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    std::vector<std::uint32_t> edge_faces(std::uint32_t u, std::uint32_t v) const {
        std::vector<std::uint32_t> out;
        for (auto f : vf_[u])
            if (contains(faces_[f], v)) out.push_back(f);
        return out;
    }

    bool has_edge(std::uint32_t u, std::uint32_t v) const { return !edge_faces(u, v).empty(); }

    std::vector<std::uint32_t> neighbors(std::uint32_t v) const {
        std::vector<std::uint32_t> out;
        for (auto f : vf_[v])
            for (auto w : faces_[f])
                if (w != v) out.push_back(w);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    double length(std::uint32_t u, std::uint32_t v) const { return (pos_[u] - pos_[v]).norm(); }

    void split(std::uint32_t u, std::uint32_t v) {
        const auto fs = edge_faces(u, v);
        const auto m = static_cast<std::uint32_t>(pos_.size());
        pos_.push_back(0.5 * (pos_[u] + pos_[v]));
        vdead_.push_back(false);
        fixed_.push_back(fs.size() == 1);
        vf_.emplace_back();
        ++alive_vertices_;
        for (auto f : fs) {
            Face t = faces_[f];
            int i = 0;
            while (!((t[static_cast<std::size_t>(i)] == u && t[static_cast<std::size_t>((i + 1) % 3)] == v) ||
                     (t[static_cast<std::size_t>(i)] == v && t[static_cast<std::size_t>((i + 1) % 3)] == u)))
                ++i;
            const auto a = t[static_cast<std::size_t>(i)], b = t[static_cast<std::size_t>((i + 1) % 3)],
                       c = t[static_cast<std::size_t>((i + 2) % 3)];
            faces_[f] = {a, m, c};
            erase(vf_[b], f);
            vf_[m].push_back(f);
            const auto g = static_cast<std::uint32_t>(faces_.size());
            faces_.push_back({m, b, c});
            fdead_.push_back(false);
            vf_[m].push_back(g);
            vf_[b].push_back(g);
            vf_[c].push_back(g);
        }
    }

    /// Collapses v into u, placing u at `p`. Returns false when any check fails.
    bool try_collapse(std::uint32_t u, std::uint32_t v, const Vec3& p, double max_edge) {
        if (alive_vertices_ <= 4) return false;
        const auto fs = edge_faces(u, v);
        if (fs.size() != 2) return false;
        std::vector<std::uint32_t> opposite;
        for (auto f : fs)
            for (auto w : faces_[f])
                if (w != u && w != v) opposite.push_back(w);
        std::sort(opposite.begin(), opposite.end());
        if (opposite[0] == opposite[1]) return false;

        const auto nu = neighbors(u), nv = neighbors(v);
        std::vector<std::uint32_t> common;
        std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
        if (common != opposite) return false;  // link condition
        for (auto o : opposite)
            if (neighbors(o).size() <= 3) return false;

        for (auto w : nu)
            if (w != v && (p - pos_[w]).norm() >= max_edge) return false;
        for (auto w : nv)
            if (w != u && (p - pos_[w]).norm() >= max_edge) return false;

        // Surviving faces must not fold over.
        for (auto x : {u, v})
            for (auto f : vf_[x]) {
                if (contains(faces_[f], u) && contains(faces_[f], v)) continue;
                const Face& t = faces_[f];
                const Vec3 before = tri_normal(pos_[t[0]], pos_[t[1]], pos_[t[2]]);
                Vec3 q[3];
                for (int i = 0; i < 3; ++i) q[i] = (t[static_cast<std::size_t>(i)] == x) ? p : pos_[t[static_cast<std::size_t>(i)]];
                const Vec3 after = tri_normal(q[0], q[1], q[2]);
                if (!(before.dot(after) > 0.0)) return false;
            }

        for (auto f : fs) {
            fdead_[f] = true;
            for (auto w : faces_[f]) erase(vf_[w], f);
        }
        for (auto f : vf_[v]) {
            for (auto& w : faces_[f])
                if (w == v) w = u;
            vf_[u].push_back(f);
        }
        vf_[v].clear();
        vdead_[v] = true;
        --alive_vertices_;
        pos_[u] = p;
        return true;
    }

    bool try_flip(std::uint32_t u, std::uint32_t v) {
        const auto fs = edge_faces(u, v);
        if (fs.size() != 2) return false;
        // Orient so that the first face runs u -> v.
        std::uint32_t f = fs[0], g = fs[1];
        if (!runs(faces_[f], u, v)) std::swap(f, g);
        if (!runs(faces_[f], u, v) || !runs(faces_[g], v, u)) return false;
        const auto a = third(faces_[f], u, v), b = third(faces_[g], u, v);
        if (a == b || has_edge(a, b)) return false;

        const auto vu = neighbors(u).size(), vv = neighbors(v).size();
        const auto va = neighbors(a).size(), vb = neighbors(b).size();
        if (vu <= (fixed_[u] ? 2u : 3u) || vv <= (fixed_[v] ? 2u : 3u)) return false;
        auto dev = [&](std::uint32_t x, std::size_t val) {
            const double d = static_cast<double>(val) - (fixed_[x] ? 4.0 : 6.0);
            return d * d;
        };
        const double before = dev(u, vu) + dev(v, vv) + dev(a, va) + dev(b, vb);
        const double after = dev(u, vu - 1) + dev(v, vv - 1) + dev(a, va + 1) + dev(b, vb + 1);
        if (!(after < before)) return false;

        const Vec3 ref = tri_normal(pos_[u], pos_[v], pos_[a]) + tri_normal(pos_[v], pos_[u], pos_[b]);
        const Vec3 n1 = tri_normal(pos_[a], pos_[u], pos_[b]);
        const Vec3 n2 = tri_normal(pos_[b], pos_[v], pos_[a]);
        if (!(n1.dot(ref) > 0.0) || !(n2.dot(ref) > 0.0)) return false;

        faces_[f] = {a, u, b};
        faces_[g] = {b, v, a};
        erase(vf_[v], f);
        erase(vf_[u], g);
        vf_[b].push_back(f);
        vf_[a].push_back(g);
        return true;
    }

    std::vector<Vec3> tangential_targets(double lambda) const {
        std::vector<Vec3> out = pos_;
        for (std::uint32_t v = 0; v < pos_.size(); ++v) {
            if (vdead_[v] || fixed_[v]) continue;
            const auto nb = neighbors(v);
            if (nb.empty()) continue;
            Vec3 c = Vec3::Zero();
            for (auto w : nb) c += pos_[w];
            c /= static_cast<double>(nb.size());
            Vec3 n = Vec3::Zero();
            for (auto f : vf_[v]) n += tri_normal(pos_[faces_[f][0]], pos_[faces_[f][1]], pos_[faces_[f][2]]);
            const double len = n.norm();
            Vec3 q = c - pos_[v];
            if (len > 0.0) {
                n /= len;
                q -= n.dot(q) * n;
            }
            out[v] = pos_[v] + lambda * q;
        }
        return out;
    }

    std::vector<Vec3>& positions() { return pos_; }
    bool dead(std::uint32_t v) const { return vdead_[v]; }
    bool fixed(std::uint32_t v) const { return fixed_[v]; }
    std::size_t vertex_slots() const { return pos_.size(); }

    /// Drops dead vertices and faces; returns old-to-new vertex ids (UINT32_MAX when dropped).
    std::pair<std::vector<std::uint32_t>, std::vector<Face>> compact() const {
        std::vector<std::uint32_t> remap(pos_.size(), UINT32_MAX);
        std::uint32_t next = 0;
        for (std::uint32_t v = 0; v < pos_.size(); ++v)
            if (!vdead_[v]) remap[v] = next++;
        std::vector<Face> faces;
        for (std::uint32_t f = 0; f < faces_.size(); ++f)
            if (!fdead_[f]) faces.push_back({remap[faces_[f][0]], remap[faces_[f][1]], remap[faces_[f][2]]});
        return {remap, faces};
    }

private:
    static bool contains(const Face& f, std::uint32_t v) { return f[0] == v || f[1] == v || f[2] == v; }
    static bool runs(const Face& f, std::uint32_t a, std::uint32_t b) {
        for (int i = 0; i < 3; ++i)
            if (f[static_cast<std::size_t>(i)] == a && f[static_cast<std::size_t>((i + 1) % 3)] == b) return true;
        return false;
    }
    static std::uint32_t third(const Face& f, std::uint32_t a, std::uint32_t b) {
        for (auto w : f)
            if (w != a && w != b) return w;
        return f[0];
    }
    static void erase(std::vector<std::uint32_t>& list, std::uint32_t x) {
        list.erase(std::remove(list.begin(), list.end(), x), list.end());
    }

    std::vector<Vec3> pos_;
    std::vector<Face> faces_;
    std::vector<bool> vdead_, fdead_, fixed_;
    std::vector<std::vector<std::uint32_t>> vf_;
    std::size_t alive_vertices_ = 0;
};

constexpr int kMaxPasses = 20;

void split_long_edges(WorkMesh& m, double hi) {
    for (int pass = 0; pass < kMaxPasses; ++pass) {
        bool changed = false;
        for (const auto& e : m.edges())
            if (m.length(e[0], e[1]) > hi && m.has_edge(e[0], e[1])) {
                m.split(e[0], e[1]);
                changed = true;
            }
        if (!changed) return;
    }
}

void collapse_short_edges(WorkMesh& m, double lo, double hi) {
    for (int pass = 0; pass < kMaxPasses; ++pass) {
        bool changed = false;
        for (const auto& e : m.edges()) {
            auto u = e[0], v = e[1];
            if (m.dead(u) || m.dead(v) || !m.has_edge(u, v) || m.length(u, v) >= lo) continue;
            if (m.fixed(u) && m.fixed(v)) continue;
            if (m.fixed(v)) std::swap(u, v);  // keep the fixed endpoint where it is
            const Vec3 p = m.fixed(u) ? m.positions()[u] : Vec3(0.5 * (m.positions()[u] + m.positions()[v]));
            changed |= m.try_collapse(u, v, p, hi);
        }
        if (!changed) return;
    }
}

void equalize_valences(WorkMesh& m) {
    for (int pass = 0; pass < kMaxPasses; ++pass) {
        bool changed = false;
        for (const auto& e : m.edges())
            if (m.has_edge(e[0], e[1])) changed |= m.try_flip(e[0], e[1]);
        if (!changed) return;
    }
}

} // namespace

RemeshResult remesh(const TriMesh& input, double target_edge, const RemeshOptions& options) {
    if (!(target_edge > 0.0) || !std::isfinite(target_edge)) throw ValidationError("remesh: target edge length must be positive");
    if (input.face_count() == 0) throw ValidationError("remesh: mesh has no faces");
    if (options.iterations < 0) throw ValidationError("remesh: negative iteration count");
    check_manifold(input);

    const double hi = 4.0 / 3.0 * target_edge, lo = 4.0 / 5.0 * target_edge;
    WorkMesh m(input);
    for (int it = 0; it < options.iterations; ++it) {
        split_long_edges(m, hi);
        collapse_short_edges(m, lo, hi);
        equalize_valences(m);
        const auto targets = m.tangential_targets(options.smoothing);
        auto& pos = m.positions();
        for (std::uint32_t v = 0; v < pos.size(); ++v)
            if (!m.dead(v) && !m.fixed(v)) pos[v] = closest_point(input, targets[v]).point;
    }

    const auto [remap, faces] = m.compact();
    RemeshResult out;
    std::vector<Vec3> verts;
    for (std::uint32_t v = 0; v < m.vertex_slots(); ++v) {
        if (remap[v] == UINT32_MAX) continue;
        const ClosestPoint cp = closest_point(input, m.positions()[v]);
        out.provenance.push_back(cp.where);
        verts.push_back(bary_point(input.vertices(), input.faces(), cp.where));
    }
    out.mesh = TriMesh(std::move(verts), faces);
    return out;
}

double mean_edge_length(const TriMesh& mesh) {
    const auto edges = unique_edges(mesh);
    if (edges.empty()) throw ValidationError("mean_edge_length: mesh has no edges");
    double sum = 0.0;
    for (const auto& e : edges) sum += (mesh.vertices()[e[0]] - mesh.vertices()[e[1]]).norm();
    return sum / static_cast<double>(edges.size());
}

double edge_band_fraction(const TriMesh& mesh, double target_edge) {
    const auto edges = unique_edges(mesh);
    if (edges.empty()) throw ValidationError("edge_band_fraction: mesh has no edges");
    std::size_t in = 0;
    for (const auto& e : edges) {
        const double l = (mesh.vertices()[e[0]] - mesh.vertices()[e[1]]).norm();
        in += l >= 0.8 * target_edge && l <= 4.0 / 3.0 * target_edge;
    }
    return static_cast<double>(in) / static_cast<double>(edges.size());
}

namespace {

RowMatrix interpolate_rows(const RowMatrix& table, std::size_t group, const std::vector<Face>& faces,
                           const std::vector<BaryCoord>& prov) {
    // `group` consecutive rows belong to one vertex (3 for per-axis tables).
    const auto g = static_cast<Eigen::Index>(group);
    RowMatrix out(static_cast<Eigen::Index>(prov.size()) * g, table.cols());
    for (std::size_t v = 0; v < prov.size(); ++v) {
        const Face& f = faces[prov[v].face];
        for (Eigen::Index r = 0; r < g; ++r)
            for (Eigen::Index c = 0; c < table.cols(); ++c)
                out(static_cast<Eigen::Index>(v) * g + r, c) =
                    bary_mix(table(f[0] * g + r, c), table(f[1] * g + r, c), table(f[2] * g + r, c), prov[v].weights);
    }
    return out;
}

} // namespace

DeformModel reproject_tables(const DeformModel& model, const RemeshResult& remeshed) {
    model.validate();
    const auto& prov = remeshed.provenance;
    const auto nv = remeshed.mesh.vertex_count();
    if (prov.size() != nv)
        throw ValidationError("reproject_tables: provenance covers " + std::to_string(prov.size()) + " of " +
                              std::to_string(nv) + " vertices");
    for (std::size_t v = 0; v < nv; ++v)
        if (prov[v].face >= model.faces.size())
            throw ValidationError("reproject_tables: provenance of vertex " + std::to_string(v) +
                                  " names a face outside the model");

    DeformModel out;
    out.canonical = remeshed.mesh.vertices();
    out.faces = remeshed.mesh.faces();
    out.parents = model.parents;
    out.betas = model.betas;
    out.expr_basis = interpolate_rows(model.expr_basis, 3, model.faces, prov);
    out.pose_correctives = interpolate_rows(model.pose_correctives, 3, model.faces, prov);
    out.skin_weights = interpolate_rows(model.skin_weights, 1, model.faces, prov);
    for (Eigen::Index r = 0; r < out.skin_weights.rows(); ++r) {
        const double s = out.skin_weights.row(r).sum();
        if (!(s > 0.0)) throw NumericalError("reproject_tables: skin weights vanish at vertex " + std::to_string(r));
        if (s != 1.0) out.skin_weights.row(r) /= s;
    }
    for (const auto& [name, table] : model.vertex_fields)
        out.vertex_fields[name] = interpolate_rows(table, 1, model.faces, prov);

    if (model.semantics) {
        SemanticAnnotation ann;
        ann.classes = model.semantics->classes;
        std::vector<double> score(ann.classes.size());
        for (std::size_t v = 0; v < nv; ++v) {
            std::fill(score.begin(), score.end(), 0.0);
            const Face& f = model.faces[prov[v].face];
            for (int c = 0; c < 3; ++c) score[model.semantics->labels[f[static_cast<std::size_t>(c)]]] += prov[v].weights[static_cast<std::size_t>(c)];
            std::size_t best = 0;
            for (std::size_t k = 1; k < score.size(); ++k)
                if (score[k] > score[best] + 1e-12) best = k;
            ann.labels.push_back(static_cast<std::uint32_t>(best));
        }
        out.semantics = std::move(ann);
    }

    for (auto lm : model.landmark_vertices) {
        const Vec3& p = model.canonical[lm];
        std::uint32_t best = 0;
        for (std::uint32_t v = 1; v < nv; ++v)
            if ((out.canonical[v] - p).squaredNorm() < (out.canonical[best] - p).squaredNorm()) best = v;
        out.landmark_vertices.push_back(best);
    }

    // Each old vertex hands its regressor mass to the corners of its closest
    // point on the new surface, so joint positions are approximately kept.
    const auto nj = static_cast<Eigen::Index>(model.joint_count());
    out.joint_regressor = RowMatrix::Zero(nj, static_cast<Eigen::Index>(nv));
    for (std::size_t old = 0; old < model.vertex_count(); ++old) {
        const auto col = model.joint_regressor.col(static_cast<Eigen::Index>(old));
        if (col.isZero(0.0)) continue;
        const ClosestPoint cp = closest_point(remeshed.mesh, model.canonical[old]);
        const Face& f = out.faces[cp.where.face];
        for (int c = 0; c < 3; ++c)
            out.joint_regressor.col(f[static_cast<std::size_t>(c)]) += cp.where.weights[static_cast<std::size_t>(c)] * col;
    }
    for (Eigen::Index j = 0; j < nj; ++j) {
        const double s = out.joint_regressor.row(j).sum();
        if (s != 0.0 && s != 1.0) out.joint_regressor.row(j) /= s;
    }
    out.validate();
    return out;
}

void put_provenance(fwb::Container& c, const std::vector<BaryCoord>& prov) {
    std::vector<std::uint32_t> faces;
    std::vector<double> bary;
    for (const auto& b : prov) {
        faces.push_back(b.face);
        bary.insert(bary.end(), b.weights.begin(), b.weights.end());
    }
    c.put_array<std::uint32_t>("prov_face", {prov.size()}, faces);
    c.put_array<double>("prov_bary", {prov.size(), 3}, bary);
}

std::vector<BaryCoord> get_provenance(const fwb::Container& c) {
    const auto faces = c.get_array<std::uint32_t>("prov_face");
    const auto bary = c.get_array<double>("prov_bary");
    if (bary.size() != 3 * faces.size()) throw ParseError("provenance chunks disagree in length");
    std::vector<BaryCoord> out(faces.size());
    for (std::size_t i = 0; i < faces.size(); ++i) out[i] = {faces[i], {bary[3 * i], bary[3 * i + 1], bary[3 * i + 2]}};
    return out;
}

} // namespace facecap
