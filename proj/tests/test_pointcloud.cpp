#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sgm/pointcloud.hpp"

namespace fs = std::filesystem;
using namespace sgm;

namespace {

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / ("sgm_pc_" + name)).string();
}

}  // namespace

TEST(PointCloud, UnitSquareSmallCounts) {
    auto pc = generate(DomainSpec::from_name("unit-square"), 4, 4, 0);
    ASSERT_EQ(pc.size(), 8u);
    EXPECT_EQ(pc.interior_indices().size(), 4u);
    for (auto i : pc.interior_indices()) {
        const double* p = pc.point(i);
        EXPECT_GT(p[0], 0.0);
        EXPECT_LT(p[0], 1.0);
        EXPECT_GT(p[1], 0.0);
        EXPECT_LT(p[1], 1.0);
    }
    for (auto i : pc.boundary_indices()) {
        const double* p = pc.point(i);
        const bool on_edge = p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
        EXPECT_TRUE(on_edge);
    }
}

TEST(PointCloud, ParameterizedSquareHasParamColumn) {
    auto pc = generate(DomainSpec::from_name("unit-square-param"), 100, 40, 1);
    ASSERT_EQ(pc.dims(), 3u);
    EXPECT_EQ(pc.schema().param_dims, std::vector<std::size_t>{2});
    for (auto i : pc.interior_indices()) {
        EXPECT_GE(pc.point(i)[2], 0.5);
        EXPECT_LE(pc.point(i)[2], 2.0);
    }
}

TEST(PointCloud, TagSoundnessAllDomains) {
    for (auto name : {"unit-square", "unit-square-param", "annulus-lite"}) {
        const auto dom = DomainSpec::from_name(name);
        auto pc = generate(dom, 300, 120, 7);
        for (std::size_t i = 0; i < pc.size(); ++i) {
            const int t = pc.tags()[i];
            if (t == interior_tag) EXPECT_TRUE(dom.strictly_inside(pc.point(i))) << name << " point " << i;
            else EXPECT_TRUE(dom.on_boundary(t, pc.point(i), 1e-12)) << name << " point " << i;
        }
    }
}

TEST(PointCloud, AnnulusParameterInterval) {
    const auto dom = DomainSpec::from_name("annulus-lite");
    EXPECT_DOUBLE_EQ(dom.param.lo, 0.75);
    EXPECT_DOUBLE_EQ(dom.param.hi, 1.1);
}

TEST(PointCloud, Deterministic) {
    const auto dom = DomainSpec::from_name("unit-square-param");
    auto a = generate(dom, 500, 50, 42);
    auto b = generate(dom, 500, 50, 42);
    auto c = generate(dom, 500, 50, 43);
    EXPECT_TRUE(a.data() == b.data());
    EXPECT_FALSE(a.data() == c.data());
}

TEST(PointCloud, LatinHypercubeStratifies) {
    auto dom = DomainSpec::from_name("unit-square");
    dom.latin_hypercube = true;
    const std::size_t n = 64;
    auto pc = generate(dom, n, 4, 3);
    for (int c = 0; c < 2; ++c) {
        std::vector<int> hits(n, 0);
        for (auto i : pc.interior_indices()) ++hits[static_cast<std::size_t>(pc.point(i)[c] * n)];
        for (auto h : hits) EXPECT_EQ(h, 1);
    }
}

TEST(PointCloud, CoverageOfCoarseGrid) {
    int failures = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto pc = generate(DomainSpec::from_name("unit-square"), 1000, 4, seed);
        int cells[4][4] = {};
        for (auto i : pc.interior_indices())
            ++cells[static_cast<int>(pc.point(i)[0] * 4)][static_cast<int>(pc.point(i)[1] * 4)];
        for (auto& row : cells)
            for (int v : row)
                if (v == 0) ++failures;
    }
    EXPECT_EQ(failures, 0);
}

TEST(PointCloud, UnknownDomain) { EXPECT_THROW(DomainSpec::from_name("torus"), ConfigError); }

TEST(PointCloud, SaveLoadRoundTripIsBitExact) {
    for (auto name : {"unit-square", "annulus-lite"}) {
        auto pc = generate(DomainSpec::from_name(name), 200, 30, 11);
        const auto path = tmp_path("roundtrip.csv");
        save(pc, path);
        auto back = load(path);
        EXPECT_TRUE(back.data() == pc.data());
        EXPECT_EQ(back.tags(), pc.tags());
        EXPECT_EQ(back.schema().names, pc.schema().names);
        EXPECT_EQ(back.schema().param_dims, pc.schema().param_dims);
    }
}

TEST(PointCloud, ArityMismatchReportsLine) {
    const auto path = tmp_path("arity.csv");
    {
        std::ofstream f(path);
        f << "# features: x,y\n0.1,0.2,interior\n0.1,0.2,0.3,interior\n";
    }
    try {
        load(path);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(PointCloud, EmptyFileHasNoHeader) {
    const auto path = tmp_path("empty.csv");
    { std::ofstream f(path); }
    try {
        load(path);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("no header"), std::string::npos);
    }
}

TEST(PointCloud, RejectsZeroCounts) {
    EXPECT_THROW(generate(DomainSpec::from_name("unit-square"), 0, 4, 0), ConfigError);
}
