#include "facecap/model_io.hpp"

#include "facecap/errors.hpp"

#include <sstream>

namespace facecap {

namespace {

std::vector<double> flatten(const std::vector<Vec3>& pts) {
    std::vector<double> out;
    out.reserve(pts.size() * 3);
    for (const auto& p : pts) out.insert(out.end(), {p.x(), p.y(), p.z()});
    return out;
}

std::span<const double> span_of(const RowMatrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }

RowMatrix read_matrix(const fwb::Container& c, const std::string& name, std::uint64_t rows, std::uint64_t cols) {
    const auto& ch = c.chunk(name);
    if (ch.element_count() != rows * cols)
        throw ParseError("chunk '" + name + "' has " + std::to_string(ch.element_count()) + " values, expected " +
                         std::to_string(rows * cols));
    const auto data = c.get_array<double>(name);
    RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

} // namespace

fwb::Container model_to_container(const DeformModel& model) {
    model.validate();
    const std::uint64_t nv = model.vertex_count(), nj = model.joint_count(), ne = model.expr_count();
    fwb::Container c;
    c.put_array<double>("canonical", {nv, 3}, flatten(model.canonical));
    std::vector<std::uint32_t> f;
    for (const auto& t : model.faces) f.insert(f.end(), t.begin(), t.end());
    c.put_array<std::uint32_t>("faces", {model.faces.size(), 3}, f);
    c.put_array<double>("expr_basis", {nv, 3, ne}, span_of(model.expr_basis));
    c.put_array<double>("pose_correctives", {nv, 3, 9 * (nj - 1)}, span_of(model.pose_correctives));
    c.put_array<double>("skin_weights", {nv, nj}, span_of(model.skin_weights));
    c.put_array<double>("joint_regressor", {nj, nv}, span_of(model.joint_regressor));
    c.put_array<std::uint32_t>("parents", {nj}, model.parents);
    if (model.semantics) {
        c.put_array<std::uint32_t>("labels", {nv}, model.semantics->labels);
        std::string names;
        for (std::size_t i = 0; i < model.semantics->classes.size(); ++i) {
            if (i) names += '\n';
            names += model.semantics->classes[i];
        }
        c.put_text("class_names", names);
    }
    if (!model.landmark_vertices.empty())
        c.put_array<std::uint32_t>("landmarks", {model.landmark_vertices.size()}, model.landmark_vertices);
    for (const auto& [name, table] : model.vertex_fields)
        c.put_array<double>("field." + name, {nv, static_cast<std::uint64_t>(table.cols())}, span_of(table));
    if (!model.betas.empty()) c.put_array<double>("betas", {model.betas.size()}, model.betas);
    return c;
}

DeformModel model_from_container(const fwb::Container& c) {
    DeformModel m;
    const auto& cc = c.chunk("canonical");
    if (cc.dims.size() != 2 || cc.dims[1] != 3) throw ParseError("chunk 'canonical' must be n_V x 3");
    const std::uint64_t nv = cc.dims[0];
    const auto canon = c.get_array<double>("canonical");
    m.canonical.resize(nv);
    for (std::size_t v = 0; v < nv; ++v) m.canonical[v] = Vec3(canon[3 * v], canon[3 * v + 1], canon[3 * v + 2]);

    const auto f = c.get_array<std::uint32_t>("faces");
    if (f.size() % 3) throw ParseError("chunk 'faces' length is not a multiple of 3");
    m.faces.resize(f.size() / 3);
    for (std::size_t i = 0; i < m.faces.size(); ++i) m.faces[i] = {f[3 * i], f[3 * i + 1], f[3 * i + 2]};

    m.parents = c.get_array<std::uint32_t>("parents");
    const std::uint64_t nj = m.parents.size();
    if (nj == 0) throw ParseError("chunk 'parents' is empty");

    const auto& eb = c.chunk("expr_basis");
    if (eb.dims.size() != 3 || eb.dims[0] != nv || eb.dims[1] != 3)
        throw ParseError("chunk 'expr_basis' must be n_V x 3 x n_e");
    m.expr_basis = read_matrix(c, "expr_basis", 3 * nv, eb.dims[2]);
    m.pose_correctives = read_matrix(c, "pose_correctives", 3 * nv, 9 * (nj - 1));
    m.skin_weights = read_matrix(c, "skin_weights", nv, nj);
    m.joint_regressor = read_matrix(c, "joint_regressor", nj, nv);

    if (c.has("labels")) {
        SemanticAnnotation s;
        s.labels = c.get_array<std::uint32_t>("labels");
        std::istringstream names(c.has("class_names") ? c.get_text("class_names") : std::string());
        for (std::string line; std::getline(names, line);)
            if (!line.empty()) s.classes.push_back(line);
        m.semantics = std::move(s);
    }
    if (c.has("landmarks")) m.landmark_vertices = c.get_array<std::uint32_t>("landmarks");
    for (const auto& ch : c.chunks()) {
        if (ch.name.rfind("field.", 0) != 0) continue;
        if (ch.dims.size() != 2 || ch.dims[0] != nv) throw ParseError("chunk '" + ch.name + "' must be n_V x w");
        m.vertex_fields[ch.name.substr(6)] = read_matrix(c, ch.name, nv, ch.dims[1]);
    }
    if (c.has("betas")) m.betas = c.get_array<double>("betas");
    m.validate();
    return m;
}

void save_model(const DeformModel& model, const std::filesystem::path& path) { model_to_container(model).write(path); }

DeformModel load_model(const std::filesystem::path& path) { return model_from_container(fwb::Container::read(path)); }

} // namespace facecap
