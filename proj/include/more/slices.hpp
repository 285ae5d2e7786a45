#pragma once

#include "more/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace more {

struct VoxelCoord {
  int slice = 0;
  int row = 0;
  int col = 0;

  bool operator==(const VoxelCoord&) const = default;
};

/// Placement of each output index in a slices x rows x cols volume.
struct SliceGeometry {
  int n_slices = 23;
  int rows = 51;
  int cols = 61;
  std::vector<VoxelCoord> voxel_map;  // one entry per output index

  /// Coordinates in range, no shared cells, map no larger than the volume.
  void validate() const;
};

/// CSV with header voxel_index,slice,row,col; every index 0..m-1 exactly once.
SliceGeometry load_geometry(const std::filesystem::path& path, int n_slices = 23, int rows = 51,
                            int cols = 61);
std::string geometry_to_csv(const SliceGeometry& geometry);
void save_geometry(const SliceGeometry& geometry, const std::filesystem::path& path);

/// Binary 8-bit PGM (P5) bytes for one slice of an already normalized volume.
std::string encode_pgm(int width, int height, const std::vector<unsigned char>& pixels);

struct RenderResult {
  std::vector<std::filesystem::path> slice_files;
  std::filesystem::path sidecar;
  double min = 0.0;
  double max = 0.0;
};

/// Writes slice_000.pgm ... one per slice plus render.json holding the
/// (min, max) used for whole-volume normalization. Mapped voxels get
/// round(255 (a - min) / (max - min)); a constant volume maps to 255;
/// unmapped cells are 0.
RenderResult render_slices(const Vector& activation, const SliceGeometry& geometry,
                           const std::filesystem::path& out_dir);

}  // namespace more
