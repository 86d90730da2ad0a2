#include "facecap/mesh_io.hpp"

#include "facecap/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace facecap {

namespace {

std::string_view next_token(std::string_view& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        s = {};
        return {};
    }
    std::size_t e = s.find_first_of(" \t\r", b);
    if (e == std::string_view::npos) e = s.size();
    auto tok = s.substr(b, e - b);
    s.remove_prefix(e);
    return tok;
}

double parse_real(std::string_view tok, std::size_t line) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw ParseError("bad number '" + std::string(tok) + "'", line);
    return v;
}

std::uint32_t parse_index(std::string_view tok, std::size_t line) {
    tok = tok.substr(0, tok.find('/'));  // v/vt/vn: keep the position index
    long long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw ParseError("bad face index '" + std::string(tok) + "'", line);
    if (v < 1) throw ParseError("face index " + std::to_string(v) + " is not a positive 1-based index", line);
    return static_cast<std::uint32_t>(v - 1);
}

} // namespace

TriMesh load_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh: " + path.string());
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::vector<std::size_t> face_lines;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = raw;
        if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        const auto kind = next_token(s);
        if (kind.empty()) continue;
        if (kind == "v") {
            Vec3 p;
            for (int d = 0; d < 3; ++d) {
                auto tok = next_token(s);
                if (tok.empty()) throw ParseError("vertex needs 3 coordinates", line);
                p[d] = parse_real(tok, line);
            }
            verts.push_back(p);
        } else if (kind == "f") {
            Face f;
            for (int k = 0; k < 3; ++k) {
                auto tok = next_token(s);
                if (tok.empty()) throw ParseError("face needs 3 indices", line);
                f[k] = parse_index(tok, line);
            }
            if (!next_token(s).empty()) throw ParseError("only triangle faces are supported", line);
            faces.push_back(f);
            face_lines.push_back(line);
        }
        // vn, vt, o, g, s, usemtl, mtllib: ignored
    }
    for (std::size_t i = 0; i < faces.size(); ++i) {
        for (auto idx : faces[i])
            if (idx >= verts.size())
                throw ParseError("face index " + std::to_string(idx + 1) + " exceeds vertex count " +
                                     std::to_string(verts.size()),
                                 face_lines[i]);
        const auto& f = faces[i];
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) throw ParseError("face repeats a vertex", face_lines[i]);
    }
    return TriMesh(std::move(verts), std::move(faces));
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path.string());
    for (const auto& v : mesh.vertices()) std::fprintf(f, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    for (const auto& t : mesh.faces()) std::fprintf(f, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    const bool ok = std::ferror(f) == 0;
    if (std::fclose(f) != 0 || !ok) throw IoError("write failed: " + path.string());
}

fwb::Container mesh_to_container(const TriMesh& mesh) {
    fwb::Container c;
    std::vector<double> v;
    v.reserve(mesh.vertex_count() * 3);
    for (const auto& p : mesh.vertices()) v.insert(v.end(), {p.x(), p.y(), p.z()});
    std::vector<std::uint32_t> f;
    f.reserve(mesh.face_count() * 3);
    for (const auto& t : mesh.faces()) f.insert(f.end(), t.begin(), t.end());
    c.put_array<double>("vertices", {mesh.vertex_count(), 3}, v);
    c.put_array<std::uint32_t>("faces", {mesh.face_count(), 3}, f);
    for (const auto& [name, ch] : mesh.attributes())
        c.put_array<double>("attr." + name, {mesh.vertex_count(), ch.width}, ch.values);
    return c;
}

TriMesh mesh_from_container(const fwb::Container& c) {
    const auto& vc = c.chunk("vertices");
    const auto& fc = c.chunk("faces");
    if (vc.dims.size() != 2 || vc.dims[1] != 3) throw ParseError("mesh chunk 'vertices' must be n x 3");
    if (fc.dims.size() != 2 || fc.dims[1] != 3) throw ParseError("mesh chunk 'faces' must be m x 3");
    const auto v = c.get_array<double>("vertices");
    const auto f = c.get_array<std::uint32_t>("faces");
    std::vector<Vec3> verts(v.size() / 3);
    for (std::size_t i = 0; i < verts.size(); ++i) verts[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
    std::vector<Face> faces(f.size() / 3);
    for (std::size_t i = 0; i < faces.size(); ++i) faces[i] = {f[3 * i], f[3 * i + 1], f[3 * i + 2]};
    TriMesh mesh(std::move(verts), std::move(faces));
    for (const auto& ch : c.chunks()) {
        if (ch.name.rfind("attr.", 0) != 0) continue;
        if (ch.dims.size() != 2) throw ParseError("attribute chunk '" + ch.name + "' must be rank 2");
        mesh.set_attribute(ch.name.substr(5), ch.dims[1], c.get_array<double>(ch.name));
    }
    return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path) {
    if (path.extension() == ".obj") return load_obj(path);
    return mesh_from_container(fwb::Container::read(path));
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
    if (path.extension() == ".obj")
        save_obj(mesh, path);
    else
        mesh_to_container(mesh).write(path);
}

} // namespace facecap
