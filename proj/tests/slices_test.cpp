#include "more/error.hpp"
#include "more/io.hpp"
#include "more/slices.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>

#include <nlohmann/json.hpp>

namespace more {
namespace {

std::string pixels_of(const std::string& pgm) {
  // Header is "P5\n<w> <h>\n255\n".
  std::size_t pos = 0;
  for (int newlines = 0; newlines < 3; ++pos) {
    if (pgm[pos] == '\n') ++newlines;
  }
  return pgm.substr(pos);
}

SliceGeometry small_geometry() {
  SliceGeometry g;
  g.n_slices = 2;
  g.rows = 3;
  g.cols = 4;
  g.voxel_map = {{0, 0, 0}, {0, 1, 2}, {1, 2, 3}};
  return g;
}

TEST(RenderSlices, ConstantActivationUsesTopLevel) {
  const auto dir = test::scratch_dir("slices_constant");
  const auto result = render_slices(Vector::Constant(3, 4.2), small_geometry(), dir);
  ASSERT_EQ(result.slice_files.size(), 2u);
  const std::string s0 = pixels_of(read_file(result.slice_files[0]));
  const std::string s1 = pixels_of(read_file(result.slice_files[1]));
  ASSERT_EQ(s0.size(), 12u);
  EXPECT_EQ(static_cast<unsigned char>(s0[0]), 255);
  EXPECT_EQ(static_cast<unsigned char>(s0[1 * 4 + 2]), 255);
  EXPECT_EQ(static_cast<unsigned char>(s1[2 * 4 + 3]), 255);
  int nonzero = 0;
  for (char c : s0 + s1) nonzero += c != 0;
  EXPECT_EQ(nonzero, 3);
}

TEST(RenderSlices, SingleVoxelLightsOnePixel) {
  const auto dir = test::scratch_dir("slices_single");
  SliceGeometry g;
  g.voxel_map = {{0, 0, 0}};
  const auto result = render_slices(Vector::Constant(1, -1.0), g, dir);
  EXPECT_EQ(result.slice_files.size(), 23u);
  const std::string pgm = read_file(result.slice_files[0]);
  EXPECT_EQ(pgm.substr(0, 13), "P5\n61 51\n255\n");
  const std::string px = pixels_of(pgm);
  ASSERT_EQ(px.size(), 51u * 61u);
  int nonzero = 0;
  for (char c : px) nonzero += c != 0;
  EXPECT_EQ(nonzero, 1);
  EXPECT_NE(px[0], 0);
}

TEST(RenderSlices, WholeVolumeNormalizationAndSidecar) {
  const auto dir = test::scratch_dir("slices_norm");
  Vector a(3);
  a << -1.0, 0.0, 3.0;
  const auto result = render_slices(a, small_geometry(), dir);
  const std::string s0 = pixels_of(read_file(result.slice_files[0]));
  const std::string s1 = pixels_of(read_file(result.slice_files[1]));
  EXPECT_EQ(static_cast<unsigned char>(s0[0]), 0);
  EXPECT_EQ(static_cast<unsigned char>(s0[6]), 64);  // round(255 / 4)
  EXPECT_EQ(static_cast<unsigned char>(s1[11]), 255);
  const auto side = nlohmann::json::parse(read_file(result.sidecar));
  EXPECT_EQ(side["min"], -1.0);
  EXPECT_EQ(side["max"], 3.0);
}

TEST(RenderSlices, IdenticalActivationsGiveIdenticalBytes) {
  std::mt19937_64 gen(1);
  const Vector a = test::random_matrix(gen, 3, 1);
  const auto d1 = test::scratch_dir("slices_same_1");
  const auto d2 = test::scratch_dir("slices_same_2");
  const auto r1 = render_slices(a, small_geometry(), d1);
  const auto r2 = render_slices(Vector(a), small_geometry(), d2);
  for (std::size_t s = 0; s < r1.slice_files.size(); ++s) {
    EXPECT_EQ(read_file(r1.slice_files[s]), read_file(r2.slice_files[s]));
  }
}

TEST(RenderSlices, LengthMismatch) {
  EXPECT_THROW(render_slices(Vector::Zero(2), small_geometry(), test::scratch_dir("slices_bad")),
               ValidationError);
}

TEST(SliceGeometry, ValidationRules) {
  SliceGeometry g = small_geometry();
  EXPECT_NO_THROW(g.validate());
  g.voxel_map.push_back({0, 0, 0});
  EXPECT_THROW(g.validate(), ValidationError);
  g = small_geometry();
  g.voxel_map[1].col = 4;
  EXPECT_THROW(g.validate(), ValidationError);
  g = small_geometry();
  g.n_slices = 1;
  g.rows = 1;
  g.cols = 2;
  EXPECT_THROW(g.validate(), ValidationError);
}

TEST(SliceGeometry, CsvRoundTripIsByteIdentical) {
  const auto dir = test::scratch_dir("slices_geometry");
  const std::string text = "voxel_index,slice,row,col\n0,0,0,0\n1,0,1,2\n2,1,2,3\n";
  {
    std::ofstream(dir / "g.csv", std::ios::binary) << text;
  }
  const SliceGeometry g = load_geometry(dir / "g.csv", 2, 3, 4);
  EXPECT_EQ(g.voxel_map, small_geometry().voxel_map);
  save_geometry(g, dir / "out.csv");
  EXPECT_EQ(read_file(dir / "out.csv"), text);
}

TEST(SliceGeometry, LoadRejectsBadTables) {
  const auto dir = test::scratch_dir("slices_geometry_bad");
  std::ofstream(dir / "dup.csv") << "voxel_index,slice,row,col\n0,0,0,0\n0,0,1,0\n";
  EXPECT_THROW(load_geometry(dir / "dup.csv"), LoadError);
  std::ofstream(dir / "range.csv") << "voxel_index,slice,row,col\n0,23,0,0\n";
  EXPECT_THROW(load_geometry(dir / "range.csv"), LoadError);
  std::ofstream(dir / "cols.csv") << "voxel_index,slice,row\n0,0,0\n";
  EXPECT_THROW(load_geometry(dir / "cols.csv"), LoadError);
}

}  // namespace
}  // namespace more
