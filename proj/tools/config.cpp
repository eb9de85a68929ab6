#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace porerom::cli {

namespace {

void check_keys(const YAML::Node& node, const std::string& section, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError("section '" + section + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T, std::size_t N>
void read_array(const YAML::Node& node, const char* key, std::array<T, N>& out) {
  if (!node[key]) return;
  std::vector<T> v;
  read(node, key, v);
  if (v.size() != N) throw ConfigError(std::string("'") + key + "' needs " + std::to_string(N) + " entries");
  std::copy(v.begin(), v.end(), out.begin());
}

template <class T>
std::string list(const T& v) {
  std::ostringstream os;
  os << '[';
  bool first = true;
  for (const auto& x : v) {
    os << (first ? "" : ", ") << x;
    first = false;
  }
  os << ']';
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (workers < 1) fail("workers must be >= 1");
  const auto& b = battery;
  if (!(b.mu_min > 0.0) || !(b.mu_max >= b.mu_min)) fail("battery.mu_range must be a positive, nonempty interval");
  if (!(b.dt > 0.0) || !(b.t_end >= b.dt)) fail("battery.dt and battery.t_end must satisfy 0 < dt <= t_end");
  if (b.n_train < 1 || b.n_test < 1) fail("battery.n_train and battery.n_test must be >= 1");
  if (b.k_grid.empty() || b.m_grid.empty()) fail("battery.k_grid and battery.m_grid must be nonempty");
  for (Index k : b.k_grid) if (k < 1) fail("battery.k_grid entries must be >= 1");
  for (Index m : b.m_grid) if (m < 1) fail("battery.m_grid entries must be >= 1");
  if (!(b.fom_mu >= 0.0)) fail("battery.fom_mu must be >= 0");
  const auto& h = heat;
  if (!(h.mu_min > 0.0) || !(h.mu_max >= h.mu_min)) fail("heat.mu_range must be a positive, nonempty interval");
  if (h.n_train < 1) fail("heat.n_train must be >= 1");
  if (!(h.target_rel > 0.0) || h.max_extensions < 0) fail("heat.target_rel > 0 and heat.max_extensions >= 0 required");
  for (Index bl : h.blocks) if (bl < 1) fail("heat.blocks entries must be >= 1");
  if (!(h.options.dt > 0.0) || h.options.n_steps < 1) fail("heat.dt > 0 and heat.n_steps >= 1 required");
  if (newton.max_iterations < 1 || !(newton.tol > 0.0)) fail("newton.tol > 0 and newton.max_iterations >= 1 required");
  try {
    constants.validate();
  } catch (const Error& e) {
    fail(std::string("constants: ") + e.what());
  }
}

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("YAML parse error: ") + e.what());
  }
  ExperimentConfig c;
  if (root.IsNull()) return c;
  check_keys(root, "<root>", {"seed", "geometry", "constants", "initial", "newton", "battery", "heat", "output", "workers"});

  if (root["seed"]) {
    std::uint64_t seed = 0;
    read(root, "seed", seed);
    c.geometry.seed = seed;
    c.battery.test_seed = seed;
  }
  if (auto g = root["geometry"]) {
    check_keys(g, "geometry", {"file", "dims", "voxel_size", "layers", "porosity", "seed"});
    if (g["file"]) {
      std::string f;
      read(g, "file", f);
      if (!f.empty()) c.geometry_file = f;
    }
    read_array(g, "dims", c.geometry.dims);
    read_array(g, "voxel_size", c.geometry.voxel_size);
    read_array(g, "layers", c.geometry.layers);
    read(g, "porosity", c.geometry.porosity);
    read(g, "seed", c.geometry.seed);
  }
  if (auto k = root["constants"]) {
    auto& p = c.constants;
    check_keys(k, "constants", {"D_e", "kappa", "t_plus", "R", "F", "temperature", "D_s", "sigma_neg",
                                "sigma_pos", "c_max_neg", "c_max_pos", "k_neg", "k_pos"});
    read(k, "D_e", p.D_e);
    read(k, "kappa", p.kappa);
    read(k, "t_plus", p.t_plus);
    read(k, "R", p.R);
    read(k, "F", p.F);
    read(k, "temperature", p.temperature);
    read(k, "D_s", p.D_s);
    read(k, "sigma_neg", p.sigma_neg);
    read(k, "sigma_pos", p.sigma_pos);
    read(k, "c_max_neg", p.c_max_neg);
    read(k, "c_max_pos", p.c_max_pos);
    read(k, "k_neg", p.k_neg);
    read(k, "k_pos", p.k_pos);
  }
  if (auto i = root["initial"]) {
    check_keys(i, "initial", {"neg_electrode", "pos_electrode", "electrolyte"});
    read(i, "neg_electrode", c.initial.neg_electrode);
    read(i, "pos_electrode", c.initial.pos_electrode);
    read(i, "electrolyte", c.initial.electrolyte);
  }
  if (auto n = root["newton"]) {
    check_keys(n, "newton", {"tol", "max_iterations", "max_halvings", "reuse_jacobian"});
    read(n, "tol", c.newton.tol);
    read(n, "max_iterations", c.newton.max_iterations);
    read(n, "max_halvings", c.newton.max_halvings);
    read(n, "reuse_jacobian", c.newton.reuse_jacobian);
  }
  if (auto b = root["battery"]) {
    check_keys(b, "battery", {"mu_range", "dt", "t_end", "n_train", "n_test", "test_seed", "k_grid", "m_grid",
                              "sparse_training", "fom_mu"});
    std::array<double, 2> r{c.battery.mu_min, c.battery.mu_max};
    read_array(b, "mu_range", r);
    c.battery.mu_min = r[0];
    c.battery.mu_max = r[1];
    read(b, "dt", c.battery.dt);
    read(b, "t_end", c.battery.t_end);
    read(b, "n_train", c.battery.n_train);
    read(b, "n_test", c.battery.n_test);
    read(b, "test_seed", c.battery.test_seed);
    read(b, "k_grid", c.battery.k_grid);
    read(b, "m_grid", c.battery.m_grid);
    read(b, "sparse_training", c.battery.sparse_training);
    read(b, "fom_mu", c.battery.fom_mu);
  }
  if (auto h = root["heat"]) {
    check_keys(h, "heat", {"mu_range", "n_train", "target_rel", "max_extensions", "blocks", "dt", "n_steps",
                           "source", "conductivities"});
    std::array<double, 2> r{c.heat.mu_min, c.heat.mu_max};
    read_array(h, "mu_range", r);
    c.heat.mu_min = r[0];
    c.heat.mu_max = r[1];
    read(h, "n_train", c.heat.n_train);
    read(h, "target_rel", c.heat.target_rel);
    read(h, "max_extensions", c.heat.max_extensions);
    read_array(h, "blocks", c.heat.blocks);
    read(h, "dt", c.heat.options.dt);
    read(h, "n_steps", c.heat.options.n_steps);
    read(h, "source", c.heat.options.source);
    if (auto k = h["conductivities"]) {
      check_keys(k, "heat.conductivities", {"neg_collector", "pos_collector", "neg_electrode", "pos_electrode"});
      read(k, "neg_collector", c.heat.conductivities.neg_collector);
      read(k, "pos_collector", c.heat.conductivities.pos_collector);
      read(k, "neg_electrode", c.heat.conductivities.neg_electrode);
      read(k, "pos_electrode", c.heat.conductivities.pos_electrode);
    }
  }
  if (root["output"]) {
    std::string o;
    read(root, "output", o);
    c.output = o;
  }
  read(root, "workers", c.workers);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os.precision(17);
  const auto& g = c.geometry;
  os << "geometry:\n";
  if (c.geometry_file) os << "  file: " << c.geometry_file->string() << "\n";
  os << "  dims: " << list(g.dims) << "\n  voxel_size: " << list(g.voxel_size) << "\n  layers: " << list(g.layers)
     << "\n  porosity: " << g.porosity << "\n  seed: " << g.seed << "\n";
  const auto& k = c.constants;
  os << "constants:\n  D_e: " << k.D_e << "\n  kappa: " << k.kappa << "\n  t_plus: " << k.t_plus << "\n  R: " << k.R
     << "\n  F: " << k.F << "\n  temperature: " << k.temperature << "\n  D_s: " << k.D_s << "\n  sigma_neg: "
     << k.sigma_neg << "\n  sigma_pos: " << k.sigma_pos << "\n  c_max_neg: " << k.c_max_neg << "\n  c_max_pos: "
     << k.c_max_pos << "\n  k_neg: " << k.k_neg << "\n  k_pos: " << k.k_pos << "\n";
  os << "initial:\n  neg_electrode: " << c.initial.neg_electrode << "\n  pos_electrode: " << c.initial.pos_electrode
     << "\n  electrolyte: " << c.initial.electrolyte << "\n";
  os << "newton:\n  tol: " << c.newton.tol << "\n  max_iterations: " << c.newton.max_iterations
     << "\n  max_halvings: " << c.newton.max_halvings << "\n  reuse_jacobian: " << std::boolalpha
     << c.newton.reuse_jacobian << "\n";
  const auto& b = c.battery;
  os << "battery:\n  mu_range: [" << b.mu_min << ", " << b.mu_max << "]\n  dt: " << b.dt << "\n  t_end: " << b.t_end
     << "\n  n_train: " << b.n_train << "\n  n_test: " << b.n_test << "\n  test_seed: " << b.test_seed
     << "\n  k_grid: " << list(b.k_grid) << "\n  m_grid: " << list(b.m_grid) << "\n  sparse_training: "
     << b.sparse_training << "\n  fom_mu: " << b.fom_mu << "\n";
  const auto& h = c.heat;
  os << "heat:\n  mu_range: [" << h.mu_min << ", " << h.mu_max << "]\n  n_train: " << h.n_train
     << "\n  target_rel: " << h.target_rel << "\n  max_extensions: " << h.max_extensions << "\n  blocks: "
     << list(h.blocks) << "\n  dt: " << h.options.dt << "\n  n_steps: " << h.options.n_steps
     << "\n  source: " << h.options.source << "\n  conductivities:\n    neg_collector: "
     << h.conductivities.neg_collector << "\n    pos_collector: " << h.conductivities.pos_collector
     << "\n    neg_electrode: " << h.conductivities.neg_electrode << "\n    pos_electrode: "
     << h.conductivities.pos_electrode << "\n";
  os << "output: " << c.output.string() << "\nworkers: " << c.workers << "\n";
  return os.str();
}

std::vector<double> equidistant(double lo, double hi, int n) {
  std::vector<double> v;
  if (n == 1) return {0.5 * (lo + hi)};
  for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * i / (n - 1));
  return v;
}

std::vector<double> uniform_draws(double lo, double hi, int n, std::uint64_t seed) {
  // raw 53-bit draws keep the sequence identical across standard libraries
  std::mt19937_64 rng(seed);
  std::vector<double> v;
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v.push_back(lo + (hi - lo) * u);
  }
  return v;
}

}  // namespace porerom::cli
