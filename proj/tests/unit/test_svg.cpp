#include <gtest/gtest.h>

#include <regex>

#include "carm/svg.hpp"

using namespace carm;

namespace {

CarmModel skx_model() {
  return build_model({{MemLevel::L1, 576}, {MemLevel::L2, 192}, {MemLevel::L3, 48}, {MemLevel::DRAM, 12.6}},
                     {{FpOp::fma, 96}, {FpOp::add, 48}}, "sim", 3.0);
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

MemoryCurveRecord curve() {
  MemoryCurveRecord c;
  c.isa = Isa::avx512;
  for (std::uint64_t b = 2048; b <= (64u << 20); b *= 2) c.points.push_back({b, b, 1e4 / std::log2(double(b)), 1});
  return c;
}

}  // namespace

TEST(RooflineSvg, ByteIdenticalAcrossRenders) {
  auto m = skx_model();
  std::vector<AppPoint> pts{{0.0830965, 0.423567, AppSource::pmu, "spmv"}, {1.0, 40, AppSource::dbi, "kernel <a&b>"}};
  PlotOptions o;
  o.title = "roofline";
  EXPECT_EQ(render_roofline_svg(m, pts, o), render_roofline_svg(m, pts, o));
}

TEST(RooflineSvg, RoofsCeilingsRidgesAndPoints) {
  auto m = skx_model();
  std::vector<AppPoint> pts{{0.1, 1, AppSource::mixed_benchmark, "x1"}, {0.5, 2, AppSource::dbi, "q\"uote"}};
  auto svg = render_roofline_svg(m, pts);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_EQ(count(svg, "class=\"roof\""), 4u);
  EXPECT_EQ(count(svg, "class=\"ceiling\""), 2u);
  EXPECT_EQ(count(svg, "class=\"ridge\""), 4u);
  EXPECT_EQ(count(svg, "class=\"point\""), 2u);
  EXPECT_NE(svg.find("data-ai=\"0.166667\""), std::string::npos);
  EXPECT_NE(svg.find("q&quot;uote"), std::string::npos);
  EXPECT_EQ(count(svg, "anomalous"), 0u);
}

TEST(RooflineSvg, PointAboveRoofFlagged) {
  auto m = skx_model();
  AppPoint high{0.01, 50, AppSource::dbi, "impossible"};
  EXPECT_TRUE(is_anomalous(m, high));
  EXPECT_FALSE(is_anomalous(m, {0.01, 5.76, AppSource::dbi, ""}));
  EXPECT_FALSE(is_anomalous(m, {100, 96, AppSource::dbi, ""}));
  auto svg = render_roofline_svg(m, {high});
  EXPECT_EQ(count(svg, "class=\"point anomalous\""), 1u);
  EXPECT_NE(svg.find("Anomalous"), std::string::npos);
}

TEST(RooflineSvg, AxesCoverContentWithMargin) {
  auto m = skx_model();
  auto ax = fit_axes(m, {{1e-3, 0.01, AppSource::pmu, ""}});
  EXPECT_LE(ax.ai_min, 1e-4);
  EXPECT_GE(ax.ai_max, 10 * 96 / 12.6);
  EXPECT_LE(ax.gflops_min, 1e-3);
  EXPECT_GE(ax.gflops_max, 960);
  PlotOptions o;
  o.ai_min = 0.5;
  EXPECT_EQ(fit_axes(m, {}, o).ai_min, 0.5);
}

TEST(MemcurveSvg, CacheMarkersAtTopologySizes) {
  CacheTopology t{32, 1024, 25344, 1408, TopologySource::preset};
  auto c = curve();
  auto svg = render_memcurve_svg(c, &t);
  EXPECT_EQ(svg, render_memcurve_svg(c, &t));
  EXPECT_EQ(count(svg, "class=\"cache-marker\""), 3u);
  EXPECT_NE(svg.find("data-level=\"L1\" data-bytes=\"32768\""), std::string::npos);
  EXPECT_NE(svg.find("data-level=\"L3\" data-bytes=\"25952256\""), std::string::npos);
  EXPECT_EQ(count(svg, "class=\"sample\""), c.points.size());
  EXPECT_EQ(count(render_memcurve_svg(c), "cache-marker"), 0u);
  c.points.resize(1);
  EXPECT_THROW(render_memcurve_svg(c), ConfigError);
}
