#include "oracles.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace porerom::testing {

GeometrySpec small_spec(std::uint64_t seed) {
  GeometrySpec s;
  s.dims = {12, 4, 4};
  s.layers = {2, 3, 2, 3, 2};
  s.porosity = 0.3;
  s.seed = seed;
  return s;
}

BatteryProblem make_battery(const GeometrySpec& spec, const PhysicalConstants& k,
                            const InitialConcentrations& init) {
  BatteryProblem p;
  p.grid = generate_synthetic_geometry(spec);
  p.interfaces = extract_interfaces(p.grid);
  p.phi_dirichlet = reference_potential(k, init);
  p.decomposition = assemble_decomposition(p.grid, p.interfaces, k, p.phi_dirichlet);
  p.c0 = initial_concentration(p.decomposition, init);
  return p;
}

double ocp_neg(double s) { return -0.132 + 1.41 * std::exp(-3.52 * s); }

double ocp_pos(double s) {
  return 0.0677504 * std::tanh(-21.8502 * s + 12.8268) -
         0.105734 * (std::pow(1.00167 - s, -0.379571) - 1.576) -
         0.045 * std::exp(-71.69 * std::pow(s, 8)) + 0.01 * std::exp(-200.0 * (s - 0.19)) + 4.06279;
}

namespace {

bool neg_side(Material m) { return m == Material::NegElectrode || m == Material::NegCollector; }
bool pos_side(Material m) { return m == Material::PosElectrode || m == Material::PosCollector; }

double sigma_of(Material m, const PhysicalConstants& k) {
  return neg_side(m) ? k.sigma_neg : k.sigma_pos;
}

// Current density j from electrode cell into electrolyte cell.
double bv_current(double c_e, double c_s, double phi_e, double phi_s, bool neg,
                  const PhysicalConstants& k) {
  const double c_max = neg ? k.c_max_neg : k.c_max_pos;
  const double rate = neg ? k.k_neg : k.k_pos;
  const double u0 = neg ? ocp_neg(c_s / c_max) : ocp_pos(c_s / c_max);
  const double arg = (phi_s - phi_e - u0) * k.F / (2.0 * k.R * k.temperature);
  if (std::abs(arg) >= 50.0) throw std::logic_error("oracle state outside the unclamped range");
  return 2.0 * rate * std::sqrt(c_e * c_s * (c_max - c_s)) * std::sinh(arg);
}

}  // namespace

Vector monolithic_residual(const MaterialGrid& g, const PhysicalConstants& k, double phi_dirichlet,
                           double mu, const Vector& c, const Vector& phi, const Vector& c_old,
                           double dt) {
  const Index n_cells = g.n_cells();
  // c numbering: non-collector cells in ascending cell order
  std::vector<Index> cdof(static_cast<std::size_t>(n_cells), -1);
  Index n_c = 0;
  for (Index cell = 0; cell < n_cells; ++cell) {
    if (!is_collector(g.material(cell))) cdof[static_cast<std::size_t>(cell)] = n_c++;
  }
  if (c.size() != n_c || phi.size() != n_cells) throw std::logic_error("oracle: state size");

  Vector r = Vector::Zero(n_c + n_cells);
  const double kd = k.kappa * (1.0 - k.t_plus) * k.R * k.temperature / k.F;
  const double vol = g.cell_volume();

  for (Index a = 0; a < n_cells; ++a) {
    const Material ma = g.material(a);
    const Index ca = cdof[static_cast<std::size_t>(a)];
    const Index pa = n_c + a;
    if (ca >= 0) r[ca] += vol * (c[ca] - c_old[ca]) / dt;

    for (int axis = 0; axis < 3; ++axis) {
      const double h = g.voxel_size()[static_cast<std::size_t>(axis)];
      const double area = g.cell_volume() / h;
      for (int dir : {-1, +1}) {
        const auto nb = g.neighbor(a, axis, dir);
        if (!nb) {
          if (ma == Material::NegCollector && axis == 0 && dir == -1) {
            r[pa] += k.sigma_neg * area / (0.5 * h) * (phi[a] - phi_dirichlet);
          } else if (ma == Material::PosCollector && axis == 0 && dir == +1) {
            r[pa] += mu * area;
          }
          continue;
        }
        const Index b = *nb;
        const Material mb = g.material(b);
        const Index cb = cdof[static_cast<std::size_t>(b)];

        if (ma == mb && ca >= 0) {
          const double D = ma == Material::Electrolyte ? k.D_e : k.D_s;
          r[ca] += D * area / h * (c[ca] - c[cb]);
        }

        if (ma == Material::Electrolyte && mb == Material::Electrolyte) {
          const double inv_c = 0.5 * (1.0 / c[ca] + 1.0 / c[cb]);
          r[pa] += k.kappa * area / h * (phi[a] - phi[b]) + kd * area / h * inv_c * (c[cb] - c[ca]);
        } else if ((neg_side(ma) && neg_side(mb)) || (pos_side(ma) && pos_side(mb))) {
          const double sa = sigma_of(ma, k);
          const double sb = sigma_of(mb, k);
          r[pa] += 2.0 * sa * sb / (sa + sb) * area / h * (phi[a] - phi[b]);
        }

        if (is_electrode(ma) && mb == Material::Electrolyte) {
          const double j = bv_current(c[cb], c[ca], phi[b], phi[a], ma == Material::NegElectrode, k);
          r[ca] += j / k.F * area;
          r[pa] += j * area;
        } else if (ma == Material::Electrolyte && is_electrode(mb)) {
          const double j = bv_current(c[ca], c[cb], phi[a], phi[b], mb == Material::NegElectrode, k);
          r[ca] -= j / k.F * area;
          r[pa] -= j * area;
        }
      }
    }
  }
  return r;
}

State random_admissible_state(const OperatorDecomposition& d, std::mt19937_64& rng, double phi_spread) {
  std::uniform_real_distribution<double> stoich(0.25, 0.85);
  std::uniform_real_distribution<double> electrolyte(0.5e-3, 2e-3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  State s;
  s.c.resize(d.layout.n_c);
  for (Index i = 0; i < d.layout.n_c; ++i) {
    switch (d.c_material[static_cast<std::size_t>(i)]) {
      case Material::NegElectrode: s.c[i] = stoich(rng) * d.constants.c_max_neg; break;
      case Material::PosElectrode: s.c[i] = stoich(rng) * d.constants.c_max_pos; break;
      default: s.c[i] = electrolyte(rng);
    }
  }
  s.phi = equilibrium_potential(d, s.c);
  for (Index i = 0; i < s.phi.size(); ++i) s.phi[i] += phi_spread * unit(rng);
  return s;
}

std::vector<Index> bfs_component(const MaterialGrid& g, const std::set<Material>& allowed,
                                 const std::vector<Index>& seeds) {
  std::vector<char> seen(static_cast<std::size_t>(g.n_cells()), 0);
  std::deque<Index> queue;
  for (Index s : seeds) {
    if (allowed.count(g.material(s)) && !seen[static_cast<std::size_t>(s)]) {
      seen[static_cast<std::size_t>(s)] = 1;
      queue.push_back(s);
    }
  }
  std::vector<Index> out;
  const auto& dims = g.dims();
  while (!queue.empty()) {
    const Index cell = queue.front();
    queue.pop_front();
    out.push_back(cell);
    const Index i = cell % dims[0];
    const Index j = (cell / dims[0]) % dims[1];
    const Index kk = cell / (dims[0] * dims[1]);
    const Index offs[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
    for (const auto& o : offs) {
      const Index ni = i + o[0], nj = j + o[1], nk = kk + o[2];
      if (ni < 0 || nj < 0 || nk < 0 || ni >= dims[0] || nj >= dims[1] || nk >= dims[2]) continue;
      const Index nb = ni + dims[0] * (nj + dims[1] * nk);
      if (seen[static_cast<std::size_t>(nb)] || !allowed.count(g.material(nb))) continue;
      seen[static_cast<std::size_t>(nb)] = 1;
      queue.push_back(nb);
    }
  }
  return out;
}

double rel_diff(const Vector& a, const Vector& b, Index begin, Index end) {
  const double den = b.segment(begin, end - begin).norm();
  const double num = (a - b).segment(begin, end - begin).norm();
  return den > 0.0 ? num / den : num;
}

DenseMatrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  DenseMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
  return m;
}

DenseMatrix random_orthonormal(Index rows, Index cols, std::mt19937_64& rng) {
  const DenseMatrix a = random_matrix(rows, cols, rng);
  Eigen::HouseholderQR<DenseMatrix> qr(a);
  return qr.householderQ() * DenseMatrix::Identity(rows, cols);
}

}  // namespace porerom::testing
