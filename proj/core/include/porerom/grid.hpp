#pragma once

#include "porerom/linalg.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace porerom {

enum class Material : std::uint8_t {
  Electrolyte = 0,
  NegElectrode = 1,
  PosElectrode = 2,
  NegCollector = 3,
  PosCollector = 4,
};

inline constexpr int kMaterialCount = 5;

std::string_view material_name(Material m);
inline bool is_electrode(Material m) {
  return m == Material::NegElectrode || m == Material::PosElectrode;
}
inline bool is_collector(Material m) {
  return m == Material::NegCollector || m == Material::PosCollector;
}

using Dims = std::array<Index, 3>;

// An internal face between cells `a` < `b`, neighbours along `axis`.
struct Face {
  Index a;
  Index b;
  int axis;
};

// Uniform voxel grid, cells numbered x-fastest: cell = i + nx * (j + ny * k).
// Lengths in cm.
class MaterialGrid {
 public:
  MaterialGrid() = default;
  MaterialGrid(Dims dims, std::array<double, 3> voxel_size, std::vector<Material> labels);

  const Dims& dims() const { return dims_; }
  const std::array<double, 3>& voxel_size() const { return h_; }
  Index n_cells() const { return static_cast<Index>(labels_.size()); }

  Material material(Index cell) const { return labels_[static_cast<std::size_t>(cell)]; }
  std::span<const Material> labels() const { return labels_; }

  Index index(Index i, Index j, Index k) const { return i + dims_[0] * (j + dims_[1] * k); }
  std::array<Index, 3> coords(Index cell) const;

  double cell_volume() const { return h_[0] * h_[1] * h_[2]; }
  // area of a face normal to `axis`
  double face_area(int axis) const;
  double spacing(int axis) const { return h_[static_cast<std::size_t>(axis)]; }

  // neighbour in direction dir = -1/+1 along axis, if inside the grid
  std::optional<Index> neighbor(Index cell, int axis, int dir) const;

  // Every internal face exactly once, ordered by (a, axis).
  std::vector<Face> internal_faces() const;

  Index count(Material m) const;

 private:
  Dims dims_{0, 0, 0};
  std::array<double, 3> h_{0.0, 0.0, 0.0};
  std::vector<Material> labels_;
};

// Layered cell: collector | neg electrode | separator | pos electrode | collector
// along x, with random electrolyte pores inside both electrodes.
struct GeometrySpec {
  Dims dims{26, 10, 10};
  std::array<double, 3> voxel_size{4e-4, 4e-4, 4e-4};
  std::array<Index, 5> layers{2, 9, 4, 9, 2};
  double porosity = 0.3;
  std::uint64_t seed = 7;
};

// Throws InvalidSpec for inconsistent layers/porosity, ConnectivityFailure if a
// degenerate layer layout makes the percolation invariants unreachable.
MaterialGrid generate_synthetic_geometry(const GeometrySpec& spec);

struct ConnectivityReport {
  bool neg_electrode_to_collector = false;
  bool pos_electrode_to_collector = false;
  bool electrolyte_spans_electrodes = false;
  bool ok() const {
    return neg_electrode_to_collector && pos_electrode_to_collector &&
           electrolyte_spans_electrodes;
  }
};

ConnectivityReport check_connectivity(const MaterialGrid& g);

enum class ElectrodeSide : std::uint8_t { Neg = 0, Pos = 1 };

struct BvFace {
  Index electrode_cell;
  Index electrolyte_cell;
  double area;
  ElectrodeSide side;
  int axis;
};

struct CollectorFace {
  Index collector_cell;
  Index electrode_cell;
  double area;
  int axis;
};

enum class BoundaryTag : std::uint8_t { NegCollectorBoundary, PosCollectorBoundary, OuterNeumann };

struct BoundaryFace {
  Index cell;
  int axis;
  int direction;  // -1: low side, +1: high side
  double area;
  BoundaryTag tag;
};

struct InterfaceSet {
  std::vector<BvFace> bv_faces;
  std::vector<CollectorFace> collector_electrode_faces;
  std::vector<BoundaryFace> boundary_faces;

  std::vector<BoundaryFace> boundary(BoundaryTag tag) const;
  Index count(BoundaryTag tag) const;
};

// Neg collector boundary = low-x faces of NegCollector cells, pos collector
// boundary = high-x faces of PosCollector cells, every other external face
// is OuterNeumann.
InterfaceSet extract_interfaces(const MaterialGrid& g);

struct Partition {
  std::array<Index, 3> blocks{1, 1, 1};
  // splits[axis] holds block start offsets plus the end, size blocks[axis] + 1
  std::array<std::vector<Index>, 3> splits;
  std::vector<int> cell_to_subdomain;
  std::vector<std::vector<Index>> subdomain_cells;  // ascending cell ids
  // keyed by (i, j) with i < j, only adjacent pairs present
  std::map<std::pair<int, int>, std::vector<Face>> coupling_faces;

  int n_subdomains() const { return static_cast<int>(subdomain_cells.size()); }
  std::vector<int> neighbors(int subdomain) const;
  bool adjacent(int i, int j) const;
};

// Near-even split per axis; the first (n mod b) blocks get one extra layer.
// Throws InvalidBlocks if a block count is < 1 or exceeds the axis length.
Partition partition_subdomains(const MaterialGrid& g, std::array<Index, 3> blocks);

// Binary geometry file: "PRGEOM01", u32 nx ny nz, f64 hx hy hz (all little
// endian), then one material byte per cell, x fastest.
void write_geometry(const MaterialGrid& g, const std::filesystem::path& path);
MaterialGrid read_geometry(const std::filesystem::path& path);

// FNV-1a over dims, voxel sizes and labels.
std::uint64_t geometry_checksum(const MaterialGrid& g);

}  // namespace porerom
