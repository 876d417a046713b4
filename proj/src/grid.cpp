#include "fracmc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace fracmc {

FineGrid::FineGrid(Index n, CellBox box) : n_(n), box_(box) {
  if (n < 1) throw InputError("fine grid needs at least one cell per side");
  if (box.x0 < 0 || box.y0 < 0 || box.x1 > n || box.y1 > n || box.nx() < 1 || box.ny() < 1)
    throw InputError("cell box outside of the fine lattice");
  h_ = 1.0 / static_cast<double>(n);
  for (Index j = 0; j <= ny(); ++j)
    for (Index i = 0; i <= nx(); ++i)
      if (is_domain_boundary(i, j)) boundary_.push_back(node(i, j));
}

FineGrid build_fine_grid(Index n) {
  if (n < 1) throw InputError("build_fine_grid: n must be >= 1");
  return FineGrid(n, CellBox{0, 0, n, n});
}

CoarsePartition::CoarsePartition(const FineGrid& grid, Index hinv, Index oversampling)
    : hinv_(hinv), oversampling_(oversampling), fine_n_(grid.n()) {
  if (grid.box() != CellBox{0, 0, grid.n(), grid.n()})
    throw InputError("coarse partition requires the full fine grid");
  if (hinv < 1) throw InputError("coarse partition: Hinv must be >= 1");
  if (oversampling < 0) throw InputError("coarse partition: oversampling layers must be >= 0");
  if (grid.n() % hinv != 0)
    throw InputError("coarse partition: Hinv = " + std::to_string(hinv) + " does not divide n = " +
                     std::to_string(grid.n()));
}

CoarsePartition build_coarse_partition(const FineGrid& grid, Index hinv, Index oversampling) {
  return CoarsePartition(grid, hinv, oversampling);
}

CellBox CoarsePartition::cells(Index b) const {
  const Index s = cells_per_block();
  const Index bx = block_x(b);
  const Index by = block_y(b);
  return {bx * s, by * s, (bx + 1) * s, (by + 1) * s};
}

CellBox CoarsePartition::oversampled(Index b, Index layers) const {
  const Index s = cells_per_block();
  const Index bx0 = std::max<Index>(0, block_x(b) - layers);
  const Index by0 = std::max<Index>(0, block_y(b) - layers);
  const Index bx1 = std::min<Index>(hinv_, block_x(b) + layers + 1);
  const Index by1 = std::min<Index>(hinv_, block_y(b) + layers + 1);
  return {bx0 * s, by0 * s, bx1 * s, by1 * s};
}

std::vector<Index> CoarsePartition::blocks_in(const CellBox& box) const {
  const Index s = cells_per_block();
  std::vector<Index> out;
  for (Index by = box.y0 / s; by < (box.y1 + s - 1) / s; ++by)
    for (Index bx = box.x0 / s; bx < (box.x1 + s - 1) / s; ++bx)
      if (box.contains(cells(block(bx, by)))) out.push_back(block(bx, by));
  return out;
}

ContinuumMap::ContinuumMap(Index n, std::vector<std::uint8_t> labels) : n_(n), labels_(std::move(labels)) {
  if (n < 1) throw InputError("continuum map: n must be >= 1");
  if (static_cast<Index>(labels_.size()) != n * n)
    throw InputError("continuum map: expected " + std::to_string(n * n) + " labels");
  for (auto l : labels_)
    if (l > 1) throw InputError("continuum map: labels must be 0 or 1");
}

Index ContinuumMap::count(std::uint8_t label) const {
  return static_cast<Index>(std::count(labels_.begin(), labels_.end(), label));
}

std::vector<std::uint8_t> centered_square_pattern(Index p) {
  if (p < 1) throw InputError("pattern needs at least one cell per period");
  const Index lo = p / 4;
  const Index hi = p - lo;
  std::vector<std::uint8_t> pattern(static_cast<std::size_t>(p * p), 1);
  for (Index j = lo; j < hi; ++j)
    for (Index i = lo; i < hi; ++i) pattern[static_cast<std::size_t>(j * p + i)] = 0;
  return pattern;
}

ContinuumMap build_periodic_medium(const FineGrid& grid, Index eps_inv, std::span<const std::uint8_t> pattern) {
  const Index n = grid.n();
  if (eps_inv < 1 || n % eps_inv != 0)
    throw InputError("periodic medium: eps_inv = " + std::to_string(eps_inv) + " does not divide n = " +
                     std::to_string(n));
  const Index p = n / eps_inv;
  if (static_cast<Index>(pattern.size()) != p * p)
    throw InputError("periodic medium: pattern must have " + std::to_string(p) + " x " + std::to_string(p) +
                     " cells");
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n * n));
  for (Index cy = 0; cy < n; ++cy)
    for (Index cx = 0; cx < n; ++cx)
      labels[static_cast<std::size_t>(cy * n + cx)] = pattern[static_cast<std::size_t>((cy % p) * p + (cx % p))];
  return ContinuumMap(n, std::move(labels));
}

ContinuumMap build_nonperiodic_demo(Index n) {
  constexpr Index tile = 5;
  if (n < tile || n % tile != 0) throw InputError("nonperiodic-demo medium needs n divisible by 5");
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n * n), 1);
  auto set0 = [&](Index cx, Index cy) {
    if (cx >= 0 && cy >= 0 && cx < n && cy < n) labels[static_cast<std::size_t>(cy * n + cx)] = 0;
  };

  // minstd_rand is fully specified by the standard; only raw draws are used.
  std::minstd_rand rng(20240601u);
  for (Index ty = 0; ty < n / tile; ++ty) {
    for (Index tx = 0; tx < n / tile; ++tx) {
      const Index side = 1 + static_cast<Index>(rng() % 2u);
      const Index ox = static_cast<Index>(rng() % static_cast<unsigned>(tile - side + 1));
      const Index oy = static_cast<Index>(rng() % static_cast<unsigned>(tile - side + 1));
      for (Index j = 0; j < side; ++j)
        for (Index i = 0; i < side; ++i) set0(tx * tile + ox + i, ty * tile + oy + j);
    }
  }

  // Channels: two partial horizontal runs, one vertical run and a diagonal.
  const Index r1 = (27 * n) / 100, r2 = (71 * n) / 100, c1 = (43 * n) / 100;
  for (Index cx = n / 10; cx < (8 * n) / 10; ++cx) set0(cx, r1);
  for (Index cx = (3 * n) / 10; cx < n; ++cx) set0(cx, r2);
  for (Index cy = (15 * n) / 100; cy < (9 * n) / 10; ++cy) set0(c1, cy);
  for (Index k = (55 * n) / 100; k < (95 * n) / 100; ++k) set0(k, k - (50 * n) / 100);
  return ContinuumMap(n, std::move(labels));
}

void write_medium(std::ostream& os, const ContinuumMap& map) {
  const Index n = map.n();
  os << "medium v1 n=" << n << '\n';
  std::string row(static_cast<std::size_t>(n), '0');
  for (Index cy = 0; cy < n; ++cy) {
    for (Index cx = 0; cx < n; ++cx) row[static_cast<std::size_t>(cx)] = map(cx, cy) ? '1' : '0';
    os << row << '\n';
  }
}

ContinuumMap read_medium(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw InputError("medium file: missing header");
  constexpr std::string_view prefix = "medium v1 n=";
  if (header.rfind(prefix, 0) != 0) throw InputError("medium file: bad header '" + header + "'");
  Index n = 0;
  try {
    std::size_t used = 0;
    const std::string digits = header.substr(prefix.size());
    n = std::stol(digits, &used);
    if (used != digits.size() || n < 1) throw InputError("");
  } catch (const std::exception&) {
    throw InputError("medium file: bad resolution in header '" + header + "'");
  }
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n * n));
  std::string line;
  for (Index cy = 0; cy < n; ++cy) {
    if (!std::getline(is, line)) throw InputError("medium file: expected " + std::to_string(n) + " rows");
    if (static_cast<Index>(line.size()) != n)
      throw InputError("medium file: row " + std::to_string(cy) + " has " + std::to_string(line.size()) +
                       " characters, expected " + std::to_string(n));
    for (Index cx = 0; cx < n; ++cx) {
      const char c = line[static_cast<std::size_t>(cx)];
      if (c != '0' && c != '1')
        throw InputError("medium file: invalid label '" + std::string(1, c) + "' at row " + std::to_string(cy));
      labels[static_cast<std::size_t>(cy * n + cx)] = static_cast<std::uint8_t>(c - '0');
    }
  }
  while (std::getline(is, line))
    if (!line.empty()) throw InputError("medium file: trailing data after " + std::to_string(n) + " rows");
  return ContinuumMap(n, std::move(labels));
}

void save_medium(const ContinuumMap& map, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write medium file " + path.string());
  write_medium(os, map);
}

ContinuumMap load_medium(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open medium file " + path.string());
  return read_medium(is);
}

ContinuumMap load_medium(const std::filesystem::path& path, const FineGrid& grid) {
  ContinuumMap map = load_medium(path);
  if (map.n() != grid.n())
    throw InputError("medium file " + path.string() + " has resolution n=" + std::to_string(map.n()) +
                     " but the grid has n=" + std::to_string(grid.n()));
  return map;
}

PermeabilityField::PermeabilityField(Index n, std::vector<double> values) : n_(n), values_(std::move(values)) {
  if (static_cast<Index>(values_.size()) != n * n)
    throw InputError("permeability field: expected " + std::to_string(n * n) + " values");
  min_ = std::numeric_limits<double>::infinity();
  max_ = 0.0;
  for (double v : values_) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError("permeability field: values must be positive and finite");
    min_ = std::min(min_, v);
    max_ = std::max(max_, v);
  }
}

std::vector<double> PermeabilityField::restrict_to(const FineGrid& patch) const {
  if (patch.n() != n_) throw InputError("permeability field: patch belongs to a different lattice");
  std::vector<double> out(static_cast<std::size_t>(patch.cell_count()));
  for (Index j = 0; j < patch.ny(); ++j)
    for (Index i = 0; i < patch.nx(); ++i)
      out[static_cast<std::size_t>(patch.cell(i, j))] = values_[static_cast<std::size_t>(patch.global_cell(i, j))];
  return out;
}

PermeabilityField kappa_from_continuum(const ContinuumMap& map, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw InputError("kappa_from_continuum: eps must lie in (0, 1)");
  const double k0 = eps / 1e5;
  const double k1 = 1.0 / (100.0 * eps);
  std::vector<double> values(map.labels().size());
  std::transform(map.labels().begin(), map.labels().end(), values.begin(),
                 [&](std::uint8_t l) { return l == 0 ? k0 : k1; });
  return PermeabilityField(map.n(), std::move(values));
}

}  // namespace fracmc
