#include "facecap/errors.hpp"
#include "facecap/mesh.hpp"
#include "facecap/remesh.hpp"
#include "facecap/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

using namespace facecap;

namespace {

void expect_valid_provenance(const TriMesh& input, const RemeshResult& r, double tol = 1e-12) {
    ASSERT_EQ(r.provenance.size(), r.mesh.vertex_count());
    for (std::size_t v = 0; v < r.provenance.size(); ++v) {
        const BaryCoord& b = r.provenance[v];
        ASSERT_LT(b.face, input.face_count());
        EXPECT_NEAR(b.weights[0] + b.weights[1] + b.weights[2], 1.0, 1e-12);
        for (double w : b.weights) EXPECT_GE(w, -1e-12);
        const Vec3 p = bary_point(input.vertices(), input.faces(), b);
        EXPECT_LE((p - r.mesh.vertices()[v]).norm(), tol);
    }
}

TriMesh flat_grid(int n) {
    std::vector<Vec3> v;
    std::vector<Face> f;
    for (int y = 0; y <= n; ++y)
        for (int x = 0; x <= n; ++x) v.emplace_back(double(x) / n, double(y) / n, 0.0);
    auto id = [n](int x, int y) { return static_cast<std::uint32_t>(y * (n + 1) + x); };
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            f.push_back({id(x, y), id(x + 1, y), id(x + 1, y + 1)});
            f.push_back({id(x, y), id(x + 1, y + 1), id(x, y + 1)});
        }
    return TriMesh(v, f);
}

} // namespace

TEST(Remesh, IcosphereAtItsOwnEdgeLengthKeepsTopologyClass) {
    const TriMesh s = make_icosphere(2);
    const double l = mean_edge_length(s);
    const RemeshResult r = remesh(s, l);
    EXPECT_EQ(euler_characteristic(r.mesh), 2);
    EXPECT_GE(edge_band_fraction(r.mesh, l), 0.95);
    const double ratio = double(r.mesh.vertex_count()) / double(s.vertex_count());
    EXPECT_GT(ratio, 0.7);
    EXPECT_LT(ratio, 1.3);
    expect_valid_provenance(s, r);
}

TEST(Remesh, HalvingTheTargetRefines) {
    const TriMesh s = make_icosphere(0);
    const double l = mean_edge_length(s) / 2.0;
    const RemeshResult r = remesh(s, l);
    EXPECT_GT(unique_edges(r.mesh).size(), unique_edges(s).size());
    EXPECT_EQ(euler_characteristic(r.mesh), 2);
    EXPECT_GE(edge_band_fraction(r.mesh, l), 0.95);
    expect_valid_provenance(s, r);
}

TEST(Remesh, HugeTargetStaysAClosedSurface) {
    const TriMesh s = make_icosphere(2);
    const RemeshResult r = remesh(s, 100.0);
    EXPECT_GE(r.mesh.face_count(), 4u);
    EXPECT_EQ(euler_characteristic(r.mesh), 2);
    // Closed: every edge has two faces.
    EXPECT_EQ(2 * unique_edges(r.mesh).size(), 3 * r.mesh.face_count());
    EXPECT_EQ(face_adjacency(r.mesh).size(), unique_edges(r.mesh).size());
    expect_valid_provenance(s, r);
}

TEST(Remesh, ZeroIterationsReturnsTheInput) {
    const TriMesh s = make_icosphere(1);
    const RemeshResult r = remesh(s, 0.3, {0, 0.5});
    ASSERT_EQ(r.mesh.vertex_count(), s.vertex_count());
    EXPECT_EQ(r.mesh.faces(), s.faces());
    for (std::size_t v = 0; v < s.vertex_count(); ++v) EXPECT_LE((r.mesh.vertices()[v] - s.vertices()[v]).norm(), 1e-12);
}

TEST(Remesh, BoundaryVerticesStayPut) {
    const TriMesh g = flat_grid(6);
    const RemeshResult r = remesh(g, 0.12);
    std::set<std::pair<double, double>> corners;
    for (const auto& p : r.mesh.vertices()) {
        EXPECT_NEAR(p.z(), 0.0, 1e-12);
        EXPECT_GE(p.x(), -1e-12);
        EXPECT_LE(p.x(), 1 + 1e-12);
        corners.insert({p.x(), p.y()});
    }
    for (auto c : {std::pair{0.0, 0.0}, std::pair{1.0, 0.0}, std::pair{0.0, 1.0}, std::pair{1.0, 1.0}})
        EXPECT_TRUE(corners.count(c)) << c.first << ", " << c.second;
    EXPECT_EQ(euler_characteristic(r.mesh), 1);
    expect_valid_provenance(g, r);
}

TEST(Remesh, NonManifoldEdgeIsNamed) {
    // Three faces on the edge (0, 1).
    const TriMesh m({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}}, {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}});
    try {
        remesh(m, 0.5);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("(0, 1)"), std::string::npos) << e.what();
    }
}

TEST(Remesh, InconsistentOrientationIsRejected) {
    const TriMesh m({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}}, {{0, 1, 2}, {0, 1, 3}});
    EXPECT_THROW(remesh(m, 0.5), ValidationError);
}

TEST(Remesh, ArgumentErrors) {
    const TriMesh s = make_icosphere(0);
    EXPECT_THROW(remesh(s, 0.0), ValidationError);
    EXPECT_THROW(remesh(s, -1.0), ValidationError);
    EXPECT_THROW(remesh(s, 0.5, {-1, 0.5}), ValidationError);
    EXPECT_THROW(remesh(TriMesh({{0, 0, 0}}, {}), 0.5), ValidationError);
}

TEST(EdgeStats, Examples) {
    const TriMesh t({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
    EXPECT_NEAR(mean_edge_length(t), (2.0 + std::sqrt(2.0)) / 3.0, 1e-15);
    EXPECT_NEAR(edge_band_fraction(t, 1.0), 2.0 / 3.0, 1e-15);  // sqrt 2 > 4/3
    EXPECT_NEAR(edge_band_fraction(t, 1.2), 1.0, 1e-15);
}

class ReprojectTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        model_ = new DeformModel(make_toy_head());
        const TriMesh in(model_->canonical, model_->faces);
        result_ = new RemeshResult(remesh(in, mean_edge_length(in) * 1.3, {3, 0.5}));
        out_ = new DeformModel(reproject_tables(*model_, *result_));
    }
    static void TearDownTestSuite() {
        delete model_;
        delete result_;
        delete out_;
    }
    static DeformModel* model_;
    static RemeshResult* result_;
    static DeformModel* out_;
};

DeformModel* ReprojectTest::model_ = nullptr;
RemeshResult* ReprojectTest::result_ = nullptr;
DeformModel* ReprojectTest::out_ = nullptr;

TEST_F(ReprojectTest, ResultIsAValidModel) {
    EXPECT_NO_THROW(out_->validate());
    EXPECT_EQ(out_->vertex_count(), result_->mesh.vertex_count());
    EXPECT_EQ(out_->expr_count(), model_->expr_count());
    EXPECT_EQ(out_->joint_count(), model_->joint_count());
    EXPECT_EQ(out_->landmark_vertices.size(), model_->landmark_vertices.size());
    ASSERT_TRUE(out_->semantics.has_value());
    EXPECT_EQ(out_->semantics->classes, model_->semantics->classes);
}

TEST_F(ReprojectTest, ConstantFieldIsExact) {
    DeformModel m = *model_;
    m.vertex_fields["constant"] = RowMatrix::Constant(static_cast<Eigen::Index>(m.vertex_count()), 1, 0.37);
    const DeformModel o = reproject_tables(m, *result_);
    const RowMatrix& c = o.vertex_fields.at("constant");
    for (Eigen::Index r = 0; r < c.rows(); ++r) EXPECT_EQ(c(r, 0), 0.37);
}

TEST_F(ReprojectTest, AffineFieldFollowsPosition) {
    DeformModel m = *model_;
    RowMatrix f(static_cast<Eigen::Index>(m.vertex_count()), 2);
    for (std::size_t v = 0; v < m.vertex_count(); ++v) {
        const Vec3& p = m.canonical[v];
        f(static_cast<Eigen::Index>(v), 0) = 0.5 + 2.0 * p.x() - p.y() + 0.25 * p.z();
        f(static_cast<Eigen::Index>(v), 1) = -3.0 * p.z();
    }
    m.vertex_fields["affine"] = f;
    const DeformModel o = reproject_tables(m, *result_);
    const RowMatrix& g = o.vertex_fields.at("affine");
    for (std::size_t v = 0; v < o.vertex_count(); ++v) {
        const Vec3& p = o.canonical[v];
        EXPECT_NEAR(g(static_cast<Eigen::Index>(v), 0), 0.5 + 2.0 * p.x() - p.y() + 0.25 * p.z(), 1e-12);
        EXPECT_NEAR(g(static_cast<Eigen::Index>(v), 1), -3.0 * p.z(), 1e-12);
    }
}

TEST_F(ReprojectTest, SkinAndRegressorRowsSumToOne) {
    for (Eigen::Index r = 0; r < out_->skin_weights.rows(); ++r) {
        EXPECT_NEAR(out_->skin_weights.row(r).sum(), 1.0, 1e-12);
        EXPECT_GE(out_->skin_weights.row(r).minCoeff(), 0.0);
    }
    for (Eigen::Index j = 0; j < out_->joint_regressor.rows(); ++j)
        EXPECT_NEAR(out_->joint_regressor.row(j).sum(), 1.0, 1e-12);
}

TEST_F(ReprojectTest, JointsStayClose) {
    const auto a = regress_joints(*model_, model_->canonical);
    const auto b = regress_joints(*out_, out_->canonical);
    const double l = mean_edge_length(result_->mesh);
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_LT((a[j] - b[j]).norm(), l) << "joint " << j;
}

TEST_F(ReprojectTest, BasesInterpolateAtProvenance) {
    const auto& prov = result_->provenance;
    for (std::size_t v = 0; v < prov.size(); v += 37) {
        const Face& f = model_->faces[prov[v].face];
        for (Eigen::Index axis = 0; axis < 3; ++axis)
            for (Eigen::Index k = 0; k < model_->expr_basis.cols(); ++k) {
                double ref = 0.0;
                for (int c = 0; c < 3; ++c)
                    ref += prov[v].weights[static_cast<std::size_t>(c)] *
                           model_->expr_basis(3 * f[static_cast<std::size_t>(c)] + axis, k);
                EXPECT_NEAR(out_->expr_basis(3 * static_cast<Eigen::Index>(v) + axis, k), ref, 1e-12);
            }
    }
}

TEST_F(ReprojectTest, LandmarksGoToTheNearestVertex) {
    for (std::size_t i = 0; i < model_->landmark_vertices.size(); ++i) {
        const Vec3& p = model_->canonical[model_->landmark_vertices[i]];
        const double d = (out_->canonical[out_->landmark_vertices[i]] - p).norm();
        for (const auto& q : out_->canonical) EXPECT_LE(d, (q - p).norm());
    }
}

TEST_F(ReprojectTest, ProvenanceMismatchThrows) {
    RemeshResult bad = *result_;
    bad.provenance.pop_back();
    EXPECT_THROW(reproject_tables(*model_, bad), ValidationError);
}

TEST(Provenance, ContainerRoundTrip) {
    const std::vector<BaryCoord> prov{{3, {0.25, 0.5, 0.25}}, {0, {1.0, 0.0, 0.0}}};
    fwb::Container c;
    put_provenance(c, prov);
    const auto back = get_provenance(fwb::Container::decode(c.encode()));
    ASSERT_EQ(back.size(), prov.size());
    for (std::size_t i = 0; i < prov.size(); ++i) {
        EXPECT_EQ(back[i].face, prov[i].face);
        EXPECT_EQ(back[i].weights, prov[i].weights);
    }
}
