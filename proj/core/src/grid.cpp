#include "porerom/grid.hpp"

#include "porerom/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <deque>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace porerom {

std::string_view material_name(Material m) {
  switch (m) {
    case Material::Electrolyte: return "electrolyte";
    case Material::NegElectrode: return "neg_electrode";
    case Material::PosElectrode: return "pos_electrode";
    case Material::NegCollector: return "neg_collector";
    case Material::PosCollector: return "pos_collector";
  }
  return "unknown";
}

MaterialGrid::MaterialGrid(Dims dims, std::array<double, 3> voxel_size,
                           std::vector<Material> labels)
    : dims_(dims), h_(voxel_size), labels_(std::move(labels)) {
  for (int a = 0; a < 3; ++a) {
    if (dims_[a] <= 0) throw InvalidSpec("grid dimensions must be positive");
    if (!(h_[a] > 0.0)) throw InvalidSpec("voxel size must be positive");
  }
  if (static_cast<Index>(labels_.size()) != dims_[0] * dims_[1] * dims_[2]) {
    throw InvalidSpec("label count does not match grid dimensions");
  }
  for (Material m : labels_) {
    if (static_cast<int>(m) >= kMaterialCount) throw InvalidSpec("invalid material label");
  }
}

std::array<Index, 3> MaterialGrid::coords(Index cell) const {
  const Index i = cell % dims_[0];
  const Index rest = cell / dims_[0];
  return {i, rest % dims_[1], rest / dims_[1]};
}

double MaterialGrid::face_area(int axis) const {
  switch (axis) {
    case 0: return h_[1] * h_[2];
    case 1: return h_[0] * h_[2];
    default: return h_[0] * h_[1];
  }
}

std::optional<Index> MaterialGrid::neighbor(Index cell, int axis, int dir) const {
  auto c = coords(cell);
  const Index pos = c[static_cast<std::size_t>(axis)] + dir;
  if (pos < 0 || pos >= dims_[static_cast<std::size_t>(axis)]) return std::nullopt;
  c[static_cast<std::size_t>(axis)] = pos;
  return index(c[0], c[1], c[2]);
}

std::vector<Face> MaterialGrid::internal_faces() const {
  std::vector<Face> faces;
  const Index n = n_cells();
  faces.reserve(static_cast<std::size_t>(3 * n));
  for (Index cell = 0; cell < n; ++cell) {
    for (int axis = 0; axis < 3; ++axis) {
      if (auto nb = neighbor(cell, axis, +1)) faces.push_back({cell, *nb, axis});
    }
  }
  return faces;
}

Index MaterialGrid::count(Material m) const {
  return static_cast<Index>(std::count(labels_.begin(), labels_.end(), m));
}

namespace {

// Flood fill from `seeds` through cells accepted by `passable`.
template <class Pred>
std::vector<char> flood(const MaterialGrid& g, const std::vector<Index>& seeds, Pred passable) {
  std::vector<char> seen(static_cast<std::size_t>(g.n_cells()), 0);
  std::deque<Index> queue;
  for (Index s : seeds) {
    if (!seen[static_cast<std::size_t>(s)]) {
      seen[static_cast<std::size_t>(s)] = 1;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const Index cell = queue.front();
    queue.pop_front();
    for (int axis = 0; axis < 3; ++axis) {
      for (int dir : {-1, 1}) {
        auto nb = g.neighbor(cell, axis, dir);
        if (!nb || seen[static_cast<std::size_t>(*nb)] || !passable(*nb)) continue;
        seen[static_cast<std::size_t>(*nb)] = 1;
        queue.push_back(*nb);
      }
    }
  }
  return seen;
}

std::vector<Index> cells_with(const MaterialGrid& g, Material m) {
  std::vector<Index> out;
  for (Index c = 0; c < g.n_cells(); ++c) {
    if (g.material(c) == m) out.push_back(c);
  }
  return out;
}

bool electrode_connected(const MaterialGrid& g, Material electrode, Material collector) {
  const auto seeds = cells_with(g, collector);
  if (seeds.empty()) return false;
  auto seen = flood(g, seeds, [&](Index c) { return g.material(c) == electrode; });
  for (Index c = 0; c < g.n_cells(); ++c) {
    if (g.material(c) == electrode && !seen[static_cast<std::size_t>(c)]) return false;
  }
  return true;
}

// Uniform double in [0, 1) from the top 53 bits, reproducible across
// standard libraries (unlike std::uniform_real_distribution).
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

ConnectivityReport check_connectivity(const MaterialGrid& g) {
  ConnectivityReport r;
  r.neg_electrode_to_collector = electrode_connected(g, Material::NegElectrode, Material::NegCollector);
  r.pos_electrode_to_collector = electrode_connected(g, Material::PosElectrode, Material::PosCollector);

  const auto electrolyte = cells_with(g, Material::Electrolyte);
  if (!electrolyte.empty()) {
    auto seen = flood(g, {electrolyte.front()},
                      [&](Index c) { return g.material(c) == Material::Electrolyte; });
    bool all = std::all_of(electrolyte.begin(), electrolyte.end(),
                           [&](Index c) { return seen[static_cast<std::size_t>(c)] != 0; });
    bool touches_neg = false;
    bool touches_pos = false;
    for (Index c : electrolyte) {
      for (int axis = 0; axis < 3; ++axis) {
        for (int dir : {-1, 1}) {
          auto nb = g.neighbor(c, axis, dir);
          if (!nb) continue;
          touches_neg |= g.material(*nb) == Material::NegElectrode;
          touches_pos |= g.material(*nb) == Material::PosElectrode;
        }
      }
    }
    r.electrolyte_spans_electrodes = all && touches_neg && touches_pos;
  }
  return r;
}

MaterialGrid generate_synthetic_geometry(const GeometrySpec& spec) {
  const auto [nx, ny, nz] = spec.dims;
  if (nx <= 0 || ny <= 0 || nz <= 0) throw InvalidSpec("grid dimensions must be positive");
  Index total = 0;
  for (Index w : spec.layers) {
    if (w < 0) throw InvalidSpec("layer widths must be non-negative");
    total += w;
  }
  if (total != nx) {
    std::ostringstream os;
    os << "layer widths sum to " << total << " but nx = " << nx;
    throw InvalidSpec(os.str());
  }
  if (!(spec.porosity >= 0.0 && spec.porosity <= 0.6)) {
    throw InvalidSpec("porosity must lie in [0, 0.6]");
  }
  if (std::any_of(spec.layers.begin(), spec.layers.end(), [](Index w) { return w == 0; })) {
    throw ConnectivityFailure("every layer needs at least one voxel for a percolating cell");
  }

  const Material order[5] = {Material::NegCollector, Material::NegElectrode, Material::Electrolyte,
                             Material::PosElectrode, Material::PosCollector};
  std::vector<Material> slab(static_cast<std::size_t>(nx));
  {
    Index x = 0;
    for (int l = 0; l < 5; ++l) {
      for (Index w = 0; w < spec.layers[static_cast<std::size_t>(l)]; ++w) {
        slab[static_cast<std::size_t>(x++)] = order[l];
      }
    }
  }
  const Index sep_begin = spec.layers[0] + spec.layers[1];
  const Index sep_end = sep_begin + spec.layers[2];

  std::vector<Material> labels(static_cast<std::size_t>(nx * ny * nz));
  std::mt19937_64 rng(spec.seed);
  for (Index k = 0; k < nz; ++k) {
    for (Index j = 0; j < ny; ++j) {
      for (Index i = 0; i < nx; ++i) {
        Material m = slab[static_cast<std::size_t>(i)];
        if (is_electrode(m) && unit_uniform(rng) < spec.porosity) m = Material::Electrolyte;
        labels[static_cast<std::size_t>(i + nx * (j + ny * k))] = m;
      }
    }
  }
  MaterialGrid g(spec.dims, spec.voxel_size, labels);

  // Pore repair: carve a straight channel along x from every pore that is
  // not connected to the separator until it meets connected electrolyte.
  auto separator_seeds = [&] {
    std::vector<Index> seeds;
    for (Index k = 0; k < nz; ++k)
      for (Index j = 0; j < ny; ++j)
        for (Index i = sep_begin; i < sep_end; ++i) seeds.push_back(g.index(i, j, k));
    return seeds;
  }();
  auto is_electrolyte = [&](Index c) { return labels[static_cast<std::size_t>(c)] == Material::Electrolyte; };
  for (;;) {
    g = MaterialGrid(spec.dims, spec.voxel_size, labels);
    auto seen = flood(g, separator_seeds, is_electrolyte);
    Index orphan = -1;
    for (Index c = 0; c < g.n_cells(); ++c) {
      if (is_electrolyte(c) && !seen[static_cast<std::size_t>(c)]) {
        orphan = c;
        break;
      }
    }
    if (orphan < 0) break;
    auto [i, j, k] = g.coords(orphan);
    const Index step = i < sep_begin ? 1 : -1;
    for (Index x = i + step; x >= 0 && x < nx; x += step) {
      const Index c = g.index(x, j, k);
      if (seen[static_cast<std::size_t>(c)]) break;
      if (is_collector(labels[static_cast<std::size_t>(c)])) {
        throw ConnectivityFailure("pore channel ran into a collector");
      }
      labels[static_cast<std::size_t>(c)] = Material::Electrolyte;
    }
  }

  // Electrode repair: solid clusters cut off from their collector become pore space.
  for (auto [electrode, collector] : {std::pair{Material::NegElectrode, Material::NegCollector},
                                      std::pair{Material::PosElectrode, Material::PosCollector}}) {
    auto seen = flood(g, cells_with(g, collector),
                      [&](Index c) { return labels[static_cast<std::size_t>(c)] == electrode; });
    for (Index c = 0; c < g.n_cells(); ++c) {
      if (labels[static_cast<std::size_t>(c)] == electrode && !seen[static_cast<std::size_t>(c)]) {
        labels[static_cast<std::size_t>(c)] = Material::Electrolyte;
      }
    }
  }
  g = MaterialGrid(spec.dims, spec.voxel_size, std::move(labels));
  if (!check_connectivity(g).ok()) {
    throw ConnectivityFailure("connectivity repair did not restore percolation");
  }
  return g;
}

std::vector<BoundaryFace> InterfaceSet::boundary(BoundaryTag tag) const {
  std::vector<BoundaryFace> out;
  std::copy_if(boundary_faces.begin(), boundary_faces.end(), std::back_inserter(out),
               [tag](const BoundaryFace& f) { return f.tag == tag; });
  return out;
}

Index InterfaceSet::count(BoundaryTag tag) const {
  return static_cast<Index>(std::count_if(boundary_faces.begin(), boundary_faces.end(),
                                          [tag](const BoundaryFace& f) { return f.tag == tag; }));
}

InterfaceSet extract_interfaces(const MaterialGrid& g) {
  InterfaceSet s;
  for (const Face& f : g.internal_faces()) {
    const Material ma = g.material(f.a);
    const Material mb = g.material(f.b);
    const double area = g.face_area(f.axis);
    if (is_electrode(ma) && mb == Material::Electrolyte) {
      s.bv_faces.push_back({f.a, f.b, area,
                            ma == Material::NegElectrode ? ElectrodeSide::Neg : ElectrodeSide::Pos, f.axis});
    } else if (is_electrode(mb) && ma == Material::Electrolyte) {
      s.bv_faces.push_back({f.b, f.a, area,
                            mb == Material::NegElectrode ? ElectrodeSide::Neg : ElectrodeSide::Pos, f.axis});
    } else if (is_collector(ma) && is_electrode(mb)) {
      s.collector_electrode_faces.push_back({f.a, f.b, area, f.axis});
    } else if (is_collector(mb) && is_electrode(ma)) {
      s.collector_electrode_faces.push_back({f.b, f.a, area, f.axis});
    }
  }
  for (Index c = 0; c < g.n_cells(); ++c) {
    for (int axis = 0; axis < 3; ++axis) {
      for (int dir : {-1, 1}) {
        if (g.neighbor(c, axis, dir)) continue;
        BoundaryTag tag = BoundaryTag::OuterNeumann;
        if (axis == 0 && dir < 0 && g.material(c) == Material::NegCollector) {
          tag = BoundaryTag::NegCollectorBoundary;
        } else if (axis == 0 && dir > 0 && g.material(c) == Material::PosCollector) {
          tag = BoundaryTag::PosCollectorBoundary;
        }
        s.boundary_faces.push_back({c, axis, dir, g.face_area(axis), tag});
      }
    }
  }
  return s;
}

std::vector<int> Partition::neighbors(int subdomain) const {
  std::vector<int> out;
  for (const auto& [key, faces] : coupling_faces) {
    if (key.first == subdomain) out.push_back(key.second);
    if (key.second == subdomain) out.push_back(key.first);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool Partition::adjacent(int i, int j) const {
  if (i > j) std::swap(i, j);
  return coupling_faces.count({i, j}) > 0;
}

Partition partition_subdomains(const MaterialGrid& g, std::array<Index, 3> blocks) {
  Partition p;
  p.blocks = blocks;
  for (int axis = 0; axis < 3; ++axis) {
    const Index n = g.dims()[static_cast<std::size_t>(axis)];
    const Index b = blocks[static_cast<std::size_t>(axis)];
    if (b < 1 || b > n) {
      std::ostringstream os;
      os << "block count " << b << " invalid for axis " << axis << " of length " << n;
      throw InvalidBlocks(os.str());
    }
    auto& s = p.splits[static_cast<std::size_t>(axis)];
    s.push_back(0);
    const Index base = n / b;
    const Index rem = n % b;
    for (Index i = 0; i < b; ++i) s.push_back(s.back() + base + (i < rem ? 1 : 0));
  }

  auto block_of = [&](int axis, Index pos) {
    const auto& s = p.splits[static_cast<std::size_t>(axis)];
    return static_cast<Index>(std::upper_bound(s.begin(), s.end(), pos) - s.begin()) - 1;
  };
  const Index n_sub = blocks[0] * blocks[1] * blocks[2];
  p.subdomain_cells.resize(static_cast<std::size_t>(n_sub));
  p.cell_to_subdomain.resize(static_cast<std::size_t>(g.n_cells()));
  for (Index c = 0; c < g.n_cells(); ++c) {
    auto [i, j, k] = g.coords(c);
    const Index s = block_of(0, i) + blocks[0] * (block_of(1, j) + blocks[1] * block_of(2, k));
    p.cell_to_subdomain[static_cast<std::size_t>(c)] = static_cast<int>(s);
    p.subdomain_cells[static_cast<std::size_t>(s)].push_back(c);
  }
  for (const Face& f : g.internal_faces()) {
    int sa = p.cell_to_subdomain[static_cast<std::size_t>(f.a)];
    int sb = p.cell_to_subdomain[static_cast<std::size_t>(f.b)];
    if (sa == sb) continue;
    p.coupling_faces[{std::min(sa, sb), std::max(sa, sb)}].push_back(f);
  }
  return p;
}

namespace {

constexpr char kGeometryMagic[8] = {'P', 'R', 'G', 'E', 'O', 'M', '0', '1'};

template <class T>
void put_le(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError("geometry file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_geometry(const MaterialGrid& g, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kGeometryMagic, sizeof(kGeometryMagic));
  for (Index d : g.dims()) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  for (double h : g.voxel_size()) put_le<double>(os, h);
  for (Material m : g.labels()) os.put(static_cast<char>(m));
  if (!os) throw IoError("failed writing " + path.string());
}

MaterialGrid read_geometry(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kGeometryMagic, 8) != 0) {
    throw IoError(path.string() + " is not a geometry file");
  }
  Dims dims;
  for (auto& d : dims) d = get_le<std::uint32_t>(is);
  std::array<double, 3> h;
  for (auto& v : h) v = get_le<double>(is);
  std::vector<Material> labels(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]));
  for (auto& m : labels) {
    const int byte = is.get();
    if (byte == EOF) throw IoError("geometry file truncated");
    if (byte >= kMaterialCount) throw IoError("geometry file holds an unknown material label");
    m = static_cast<Material>(byte);
  }
  return MaterialGrid(dims, h, std::move(labels));
}

std::uint64_t geometry_checksum(const MaterialGrid& g) {
  std::uint64_t hash = 1469598103934665603ull;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= p[i];
      hash *= 1099511628211ull;
    }
  };
  for (Index d : g.dims()) mix(&d, sizeof(d));
  for (double h : g.voxel_size()) mix(&h, sizeof(h));
  mix(g.labels().data(), g.labels().size());
  return hash;
}

}  // namespace porerom
