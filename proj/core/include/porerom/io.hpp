#pragma once

#include "porerom/battery_fom.hpp"
#include "porerom/reduction.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace porerom::io {

// Binary block file: "PRBLK001", u32 block count, then per block u32 name
// length, name bytes, u64 rows, u64 cols and rows*cols column-major f64.
// All integers and floats little endian.
using BlockMap = std::map<std::string, DenseMatrix>;

void write_blocks(const BlockMap& blocks, const std::filesystem::path& path);
// Throws IoError on a missing file, bad magic or truncation.
BlockMap read_blocks(const std::filesystem::path& path);

// Trajectory file: block "states" holds one column (time, c, phi) per time
// step, "meta" = (mu, dt, n_c, newton_iterations, wall_seconds), recorded
// stages under "stages_1c" / "stages_bv".
void write_trajectory(const Trajectory& t, const std::filesystem::path& path);
Trajectory read_trajectory(const std::filesystem::path& path);

void write_basis(const ReducedBasis& b, const std::filesystem::path& path);
ReducedBasis read_basis(const std::filesystem::path& path);

void write_ei(const EIData& ei, const std::filesystem::path& path);
EIData read_ei(const std::filesystem::path& path);

// One CSV cell; numbers are written with 17 significant digits.
struct Cell {
  std::string text;
  Cell(double v);
  Cell(Index v);
  Cell(int v) : Cell(static_cast<Index>(v)) {}
  Cell(std::string v) : text(std::move(v)) {}
  Cell(const char* v) : text(v) {}
};

// Comma separated table with a fixed header. Throws IoError.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  // Throws DimensionMismatch if the cell count differs from the header.
  void write(const std::vector<Cell>& cells);
  const std::vector<std::string>& header() const { return header_; }

 private:
  std::ofstream out_;
  std::vector<std::string> header_;
};

std::string format_double(double v);

// Reads a CSV written by CsvWriter: header plus rows of cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Index column(const std::string& name) const;  // -1 if absent
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace porerom::io
