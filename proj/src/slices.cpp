#include "more/slices.hpp"

#include "more/error.hpp"
#include "more/io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <set>
#include <tuple>

namespace more {

void SliceGeometry::validate() const {
  if (n_slices < 1 || rows < 1 || cols < 1) throw ValidationError("geometry extents must be >= 1");
  const auto capacity = static_cast<std::size_t>(n_slices) * static_cast<std::size_t>(rows) *
                        static_cast<std::size_t>(cols);
  if (voxel_map.size() > capacity) {
    throw ValidationError("geometry maps " + std::to_string(voxel_map.size()) +
                          " voxels into a volume of " + std::to_string(capacity) + " cells");
  }
  std::set<std::tuple<int, int, int>> seen;
  for (std::size_t v = 0; v < voxel_map.size(); ++v) {
    const auto& c = voxel_map[v];
    if (c.slice < 0 || c.slice >= n_slices || c.row < 0 || c.row >= rows || c.col < 0 ||
        c.col >= cols) {
      throw ValidationError("voxel " + std::to_string(v) + " lies outside the volume");
    }
    if (!seen.emplace(c.slice, c.row, c.col).second) {
      throw ValidationError("voxel " + std::to_string(v) + " shares a cell with another voxel");
    }
  }
}

SliceGeometry load_geometry(const std::filesystem::path& path, int n_slices, int rows, int cols) {
  const Matrix table = read_matrix_csv(path);
  if (table.cols() != 4) {
    throw LoadError(path.string() + ": expected columns voxel_index,slice,row,col");
  }
  SliceGeometry geometry{n_slices, rows, cols, {}};
  geometry.voxel_map.resize(static_cast<std::size_t>(table.rows()));
  std::vector<bool> filled(static_cast<std::size_t>(table.rows()), false);
  for (Index r = 0; r < table.rows(); ++r) {
    for (Index c = 0; c < 4; ++c) {
      if (table(r, c) != std::floor(table(r, c))) {
        throw LoadError(path.string() + ": row " + std::to_string(r + 1) + " holds a non-integer");
      }
    }
    const auto index = static_cast<Index>(table(r, 0));
    if (index < 0 || index >= table.rows() || filled[static_cast<std::size_t>(index)]) {
      throw LoadError(path.string() + ": voxel_index " + std::to_string(index) +
                      " is out of range or repeated");
    }
    filled[static_cast<std::size_t>(index)] = true;
    geometry.voxel_map[static_cast<std::size_t>(index)] = {
        static_cast<int>(table(r, 1)), static_cast<int>(table(r, 2)), static_cast<int>(table(r, 3))};
  }
  try {
    geometry.validate();
  } catch (const ValidationError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  return geometry;
}

std::string geometry_to_csv(const SliceGeometry& geometry) {
  std::string out = "voxel_index,slice,row,col\n";
  for (std::size_t v = 0; v < geometry.voxel_map.size(); ++v) {
    const auto& c = geometry.voxel_map[v];
    out += std::to_string(v) + "," + std::to_string(c.slice) + "," + std::to_string(c.row) + "," +
           std::to_string(c.col) + "\n";
  }
  return out;
}

void save_geometry(const SliceGeometry& geometry, const std::filesystem::path& path) {
  geometry.validate();
  write_file_atomic(path, geometry_to_csv(geometry));
}

std::string encode_pgm(int width, int height, const std::vector<unsigned char>& pixels) {
  if (static_cast<std::size_t>(width) * static_cast<std::size_t>(height) != pixels.size()) {
    throw ShapeError("pixel buffer does not match image size");
  }
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(pixels.begin(), pixels.end());
  return out;
}

RenderResult render_slices(const Vector& activation, const SliceGeometry& geometry,
                           const std::filesystem::path& out_dir) {
  geometry.validate();
  if (static_cast<std::size_t>(activation.size()) != geometry.voxel_map.size()) {
    throw ValidationError("activation has " + std::to_string(activation.size()) +
                          " values but geometry maps " +
                          std::to_string(geometry.voxel_map.size()) + " voxels");
  }
  if (activation.size() == 0) throw ValidationError("activation is empty");
  if (!activation.allFinite()) throw ValidationError("activation contains NaN or Inf");

  RenderResult result;
  result.min = activation.minCoeff();
  result.max = activation.maxCoeff();
  const double span = result.max - result.min;

  const auto plane = static_cast<std::size_t>(geometry.rows) * static_cast<std::size_t>(geometry.cols);
  std::vector<std::vector<unsigned char>> slices(static_cast<std::size_t>(geometry.n_slices),
                                                 std::vector<unsigned char>(plane, 0));
  for (std::size_t v = 0; v < geometry.voxel_map.size(); ++v) {
    const auto& c = geometry.voxel_map[v];
    const double level =
        span > 0.0 ? std::round(255.0 * (activation(static_cast<Index>(v)) - result.min) / span) : 255.0;
    slices[static_cast<std::size_t>(c.slice)]
          [static_cast<std::size_t>(c.row) * static_cast<std::size_t>(geometry.cols) +
           static_cast<std::size_t>(c.col)] = static_cast<unsigned char>(level);
  }

  std::filesystem::create_directories(out_dir);
  for (int s = 0; s < geometry.n_slices; ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "slice_%03d.pgm", s);
    const auto path = out_dir / name;
    write_file_atomic(path, encode_pgm(geometry.cols, geometry.rows, slices[static_cast<std::size_t>(s)]));
    result.slice_files.push_back(path);
  }
  nlohmann::ordered_json sidecar;
  sidecar["min"] = result.min;
  sidecar["max"] = result.max;
  sidecar["n_slices"] = geometry.n_slices;
  sidecar["rows"] = geometry.rows;
  sidecar["cols"] = geometry.cols;
  result.sidecar = out_dir / "render.json";
  write_file_atomic(result.sidecar, sidecar.dump(2) + "\n");
  return result;
}

}  // namespace more
