#include "porerom/io.hpp"

#include "porerom/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <iomanip>
#include <limits>
#include <sstream>

namespace porerom::io {

namespace {

constexpr char kMagic[8] = {'P', 'R', 'B', 'L', 'K', '0', '0', '1'};

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw IoError("truncated block file: " + path.string());
  }
  return to_little(v);
}

DenseMatrix row_vector(std::initializer_list<double> v) {
  DenseMatrix m(1, static_cast<Index>(v.size()));
  Index j = 0;
  for (double x : v) m(0, j++) = x;
  return m;
}

DenseMatrix indices(const std::vector<Index>& v) {
  DenseMatrix m(static_cast<Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Index>(i), 0) = static_cast<double>(v[i]);
  return m;
}

std::vector<Index> to_indices(const DenseMatrix& m) {
  std::vector<Index> v(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.size(); ++i) v[static_cast<std::size_t>(i)] = static_cast<Index>(m.data()[i]);
  return v;
}

const DenseMatrix& need(const BlockMap& b, const std::string& name, const std::filesystem::path& path) {
  auto it = b.find(name);
  if (it == b.end()) throw IoError("block '" + name + "' missing in " + path.string());
  return it->second;
}

}  // namespace

void write_blocks(const BlockMap& blocks, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& [name, m] : blocks) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
    if constexpr (std::endian::native == std::endian::little) {
      os.write(reinterpret_cast<const char*>(m.data()),
               static_cast<std::streamsize>(m.size() * static_cast<Index>(sizeof(double))));
    } else {
      for (Index i = 0; i < m.size(); ++i) put<double>(os, m.data()[i]);
    }
  }
  if (!os) throw IoError("write failed: " + path.string());
}

BlockMap read_blocks(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a block file: " + path.string());
  }
  BlockMap out;
  const auto count = get<std::uint32_t>(is, path);
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto len = get<std::uint32_t>(is, path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw IoError("truncated block file: " + path.string());
    const auto rows = get<std::uint64_t>(is, path);
    const auto cols = get<std::uint64_t>(is, path);
    if (rows > (1ULL << 40) || cols > (1ULL << 40)) throw IoError("corrupt block shape in " + path.string());
    DenseMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = get<double>(is, path);
    out.emplace(std::move(name), std::move(m));
  }
  return out;
}

void write_trajectory(const Trajectory& t, const std::filesystem::path& path) {
  const Index n_c = t.c.rows();
  const Index n_phi = t.phi.rows();
  DenseMatrix states(1 + n_c + n_phi, t.n_states());
  states.row(0) = t.times.transpose();
  states.middleRows(1, n_c) = t.c;
  states.bottomRows(n_phi) = t.phi;
  BlockMap b;
  b["meta"] = row_vector({t.mu, t.dt, static_cast<double>(n_c),
                          static_cast<double>(t.newton_iterations), t.wall_seconds});
  b["states"] = std::move(states);
  b["stages_1c"] = t.stages.one_over_c;
  b["stages_bv"] = t.stages.butler_volmer;
  write_blocks(b, path);
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  const BlockMap b = read_blocks(path);
  const DenseMatrix& meta = need(b, "meta", path);
  const DenseMatrix& states = need(b, "states", path);
  if (meta.size() != 5) throw IoError("bad trajectory meta in " + path.string());
  Trajectory t;
  t.mu = meta(0);
  t.dt = meta(1);
  const auto n_c = static_cast<Index>(meta(2));
  t.newton_iterations = static_cast<int>(meta(3));
  t.wall_seconds = meta(4);
  if (n_c < 0 || n_c + 1 > states.rows()) throw IoError("bad trajectory layout in " + path.string());
  t.times = states.row(0).transpose();
  t.c = states.middleRows(1, n_c);
  t.phi = states.bottomRows(states.rows() - 1 - n_c);
  t.stages.one_over_c = need(b, "stages_1c", path);
  t.stages.butler_volmer = need(b, "stages_bv", path);
  return t;
}

void write_basis(const ReducedBasis& rb, const std::filesystem::path& path) {
  BlockMap b;
  b["modes"] = rb.modes;
  b["singular_values"] = rb.singular_values;
  DenseMatrix trip(3, rb.product.nonZeros());
  Index k = 0;
  for (Index r = 0; r < rb.product.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(rb.product, r); it; ++it, ++k) {
      trip(0, k) = static_cast<double>(it.row());
      trip(1, k) = static_cast<double>(it.col());
      trip(2, k) = it.value();
    }
  }
  b["product_shape"] = row_vector({static_cast<double>(rb.product.rows()),
                                   static_cast<double>(rb.product.cols())});
  b["product_entries"] = std::move(trip);
  write_blocks(b, path);
}

ReducedBasis read_basis(const std::filesystem::path& path) {
  const BlockMap b = read_blocks(path);
  ReducedBasis rb;
  rb.modes = need(b, "modes", path);
  rb.singular_values = need(b, "singular_values", path);
  const DenseMatrix& shape = need(b, "product_shape", path);
  const DenseMatrix& trip = need(b, "product_entries", path);
  if (shape.size() != 2 || trip.rows() != 3) throw IoError("bad product blocks in " + path.string());
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(trip.cols()));
  for (Index k = 0; k < trip.cols(); ++k) {
    t.emplace_back(static_cast<Index>(trip(0, k)), static_cast<Index>(trip(1, k)), trip(2, k));
  }
  rb.product = linalg::from_triplets(static_cast<Index>(shape(0)), static_cast<Index>(shape(1)), t);
  return rb;
}

void write_ei(const EIData& ei, const std::filesystem::path& path) {
  BlockMap b;
  b["meta"] = row_vector({static_cast<double>(ei.n_full), ei.degenerate ? 1.0 : 0.0});
  b["rows"] = indices(ei.rows);
  b["interp_dofs"] = indices(ei.interp_dofs);
  b["interp_rows"] = indices(ei.interp_rows);
  b["source_dofs"] = indices(ei.source_dofs);
  b["collateral"] = ei.collateral;
  b["interp_matrix"] = ei.interp_matrix;
  DenseMatrix ge(static_cast<Index>(ei.greedy_errors.size()), 1);
  for (std::size_t i = 0; i < ei.greedy_errors.size(); ++i) ge(static_cast<Index>(i), 0) = ei.greedy_errors[i];
  b["greedy_errors"] = std::move(ge);
  write_blocks(b, path);
}

EIData read_ei(const std::filesystem::path& path) {
  const BlockMap b = read_blocks(path);
  const DenseMatrix& meta = need(b, "meta", path);
  if (meta.size() != 2) throw IoError("bad EI meta in " + path.string());
  EIData ei;
  ei.n_full = static_cast<Index>(meta(0));
  ei.degenerate = meta(1) != 0.0;
  ei.rows = to_indices(need(b, "rows", path));
  ei.interp_dofs = to_indices(need(b, "interp_dofs", path));
  ei.interp_rows = to_indices(need(b, "interp_rows", path));
  ei.source_dofs = to_indices(need(b, "source_dofs", path));
  ei.collateral = need(b, "collateral", path);
  ei.interp_matrix = need(b, "interp_matrix", path);
  const DenseMatrix& ge = need(b, "greedy_errors", path);
  ei.greedy_errors.assign(ge.data(), ge.data() + ge.size());
  return ei;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

Cell::Cell(double v) : text(format_double(v)) {}
Cell::Cell(Index v) : text(std::to_string(v)) {}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : out_(path, std::ios::trunc), header_(std::move(header)) {
  if (!out_) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < header_.size(); ++i) out_ << (i ? "," : "") << header_[i];
  out_ << '\n';
}

void CsvWriter::write(const std::vector<Cell>& cells) {
  if (cells.size() != header_.size()) throw DimensionMismatch("CsvWriter: cell count differs from header");
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i].text;
  out_ << '\n';
  out_.flush();
  if (!out_) throw IoError("CSV write failed");
}

Index CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<Index>(it - header.begin());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty CSV " + path.string());
  t.header = split(line);
  while (std::getline(is, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

}  // namespace porerom::io
