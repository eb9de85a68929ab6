#include "studies.hpp"

#include "porerom/errors.hpp"
#include "porerom/io.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

namespace porerom::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Fnv {
  std::uint64_t h = 1469598103934665603ULL;
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
};

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void say(std::ostream* log, const std::string& m) {
  static std::mutex mtx;
  if (!log) return;
  std::lock_guard<std::mutex> lock(mtx);
  *log << m << std::endl;
}

DependencyFn deps_of(const NonlinearOperator& op) {
  return [&op](Index i) { return op.dependencies(i); };
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void write_sweep_csv(const std::vector<SweepCell>& cells, const fs::path& path) {
  io::CsvWriter w(path, {"k", "M", "rel_err_c", "rel_err_phi", "online_time_s", "fom_time_s", "speedup", "failures"});
  for (const auto& c : cells) {
    w.write({c.k, c.m, c.err_c, c.err_phi, c.online_seconds, c.fom_seconds, c.speedup, c.failures});
  }
}

}  // namespace

MaterialGrid load_geometry(const ExperimentConfig& c) {
  if (c.geometry_file) return read_geometry(*c.geometry_file);
  return generate_synthetic_geometry(c.geometry);
}

BatterySetup battery_setup(const ExperimentConfig& c) {
  BatterySetup s;
  s.grid = load_geometry(c);
  s.checksum = geometry_checksum(s.grid);
  const InterfaceSet ifs = extract_interfaces(s.grid);
  s.decomposition = assemble_decomposition(s.grid, ifs, c.constants, reference_potential(c.constants, c.initial));
  s.c0 = initial_concentration(s.decomposition, c.initial);
  return s;
}

FomCache::FomCache(fs::path dir, const ExperimentConfig& c, std::uint64_t geometry_checksum)
    : dir_(std::move(dir)), cfg_(c) {
  Fnv f;
  f.add(geometry_checksum);
  f.add(c.constants.hash());
  f.add(c.initial.neg_electrode);
  f.add(c.initial.pos_electrode);
  f.add(c.initial.electrolyte);
  f.add(c.newton.tol);
  f.add(static_cast<std::uint64_t>(c.newton.max_iterations));
  f.add(static_cast<std::uint64_t>(c.newton.max_halvings));
  f.add(static_cast<std::uint64_t>(c.newton.reuse_jacobian));
  f.add(c.battery.dt);
  f.add(c.battery.t_end);
  base_key_ = f.h;
  if (!dir_.empty()) fs::create_directories(dir_);
}

fs::path FomCache::file(double mu) const {
  Fnv f;
  f.add(base_key_);
  f.add(mu);
  return dir_ / ("fom_" + hex(f.h) + ".bin");
}

Trajectory FomCache::get(const BatterySetup& s, double mu, bool record_stages) {
  const fs::path path = file(mu);
  if (!dir_.empty() && fs::exists(path)) {
    try {
      Trajectory t = io::read_trajectory(path);
      const bool shape_ok = t.mu == mu && t.c.rows() == s.decomposition.layout.n_c &&
                            t.phi.rows() == s.decomposition.layout.n_phi;
      if (shape_ok && (!record_stages || t.stages.count() > 0)) {
        ++hits_;
        return t;
      }
    } catch (const IoError&) {
      // unreadable entry, recompute below
    }
  }
  ++misses_;
  Trajectory t = simulate(s.decomposition, mu, s.c0, cfg_.battery.dt, cfg_.battery.t_end, cfg_.newton, record_stages);
  if (!dir_.empty()) {
    // write then rename so concurrent readers never see a partial file
    const fs::path tmp = path.string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    io::write_trajectory(t, tmp);
    fs::rename(tmp, path);
  }
  return t;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex mtx;
  auto body = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mtx);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(workers, n); ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::vector<Trajectory> run_foms(const BatterySetup& s, FomCache& cache, const std::vector<double>& mus,
                                 bool record_stages, int workers) {
  std::vector<Trajectory> out(mus.size());
  std::mutex mtx;
  parallel_for(static_cast<int>(mus.size()), workers, [&](int i) {
    Trajectory t = cache.get(s, mus[static_cast<std::size_t>(i)], record_stages);
    std::lock_guard<std::mutex> lock(mtx);
    out[static_cast<std::size_t>(i)] = std::move(t);
  });
  return out;
}

BatteryTraining train_battery(const BatterySetup& s, std::vector<Trajectory>& train, Index k_max, Index m_max) {
  const auto t0 = Clock::now();
  const auto& d = s.decomposition;
  BatteryTraining out;
  for (const auto& t : train) {
    out.n_snapshots += t.n_states();
    out.n_evaluations += t.stages.count();
  }
  DenseMatrix sc(d.layout.n_c, out.n_snapshots);
  DenseMatrix sp(d.layout.n_phi, out.n_snapshots);
  const auto& sup_1c = d.one_over_c.support();
  const auto& sup_bv = d.butler_volmer.support();
  DenseMatrix e1(static_cast<Index>(sup_1c.size()), out.n_evaluations);
  DenseMatrix eb(static_cast<Index>(sup_bv.size()), out.n_evaluations);
  Index col = 0;
  Index ecol = 0;
  for (auto& t : train) {
    sc.middleCols(col, t.n_states()) = t.c;
    sp.middleCols(col, t.n_states()) = t.phi;
    col += t.n_states();
    const Index ns = t.stages.count();
    e1.middleCols(ecol, ns) = t.stages.one_over_c;
    eb.middleCols(ecol, ns) = t.stages.butler_volmer;
    ecol += ns;
    t.stages = {};
  }
  out.basis_c = pod(sc, PodOptions::fixed(k_max));
  out.basis_phi = pod(sp, PodOptions::fixed(k_max));
  EIOptions eo;
  eo.max_size = m_max;
  out.ei_1c = ei_greedy(std::move(e1), sup_1c, d.size(), eo, deps_of(d.one_over_c));
  out.ei_bv = ei_greedy(std::move(eb), sup_bv, d.size(), eo, deps_of(d.butler_volmer));
  out.seconds = since(t0);
  return out;
}

ReducedBatteryModel rom_for(const BatterySetup& s, const BatteryTraining& t, Index k, Index m) {
  const auto& d = s.decomposition;
  return build_rom(d, truncate(t.basis_c, k), truncate(t.basis_phi, k), truncate(t.ei_1c, m, deps_of(d.one_over_c)),
                   truncate(t.ei_bv, m, deps_of(d.butler_volmer)), s.c0);
}

std::vector<SweepCell> sweep(const BatterySetup& s, const BatteryTraining& t, const std::vector<Index>& k_grid,
                             const std::vector<Index>& m_grid, const std::vector<Trajectory>& test, double dt,
                             double t_end, int workers) {
  std::vector<SweepCell> cells;
  for (Index k : k_grid) {
    for (Index m : m_grid) cells.push_back({k, m});
  }
  std::vector<double> fom_times;
  for (const auto& f : test) fom_times.push_back(f.wall_seconds);
  const double fom_mean = mean(fom_times);

  parallel_for(static_cast<int>(cells.size()), workers, [&](int ci) {
    SweepCell& cell = cells[static_cast<std::size_t>(ci)];
    const ReducedBatteryModel rom = rom_for(s, t, cell.k, cell.m);
    const Vector a_c0 = project_concentration(rom, s.c0);
    std::vector<Trajectory> fom_ok;
    std::vector<Trajectory> rom_ok;
    std::vector<double> online;
    for (const auto& f : test) {
      try {
        const ReducedTrajectory rt = rom_simulate(rom, f.mu, a_c0, dt, t_end);
        online.push_back(rt.wall_seconds);
        rom_ok.push_back(reconstruct(rom, rt));
        fom_ok.push_back(f);
      } catch (const NumericalError&) {
        ++cell.failures;
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    cell.err_c = cell.failures ? nan : relative_reduction_error(fom_ok, rom_ok, Field::Concentration);
    cell.err_phi = cell.failures ? nan : relative_reduction_error(fom_ok, rom_ok, Field::Potential);
    cell.online_seconds = mean(online);
    cell.fom_seconds = fom_mean;
    cell.speedup = fom_mean / cell.online_seconds;
  });
  return cells;
}

BatteryStudyResult battery_study(const ExperimentConfig& c, const fs::path& out, std::ostream* log) {
  const auto t0 = Clock::now();
  fs::create_directories(out);
  BatteryStudyResult res;
  const auto& b = c.battery;
  const BatterySetup s = battery_setup(c);
  FomCache cache(out / "cache", c, s.checksum);
  res.train_mu = equidistant(b.mu_min, b.mu_max, b.n_train);
  res.test_mu = uniform_draws(b.mu_min, b.mu_max, b.n_test, b.test_seed);
  const Index k_max = *std::max_element(b.k_grid.begin(), b.k_grid.end());
  const Index m_max = *std::max_element(b.m_grid.begin(), b.m_grid.end());

  say(log, "battery: " + std::to_string(s.decomposition.size()) + " unknowns, " + std::to_string(b.n_train) +
               " training and " + std::to_string(b.n_test) + " test parameters");
  std::vector<Trajectory> test = run_foms(s, cache, res.test_mu, false, c.workers);
  say(log, "battery: test trajectories ready");

  auto study = [&](const std::vector<double>& mus, const std::string& name) {
    std::vector<Trajectory> train = run_foms(s, cache, mus, true, c.workers);
    say(log, "battery[" + name + "]: training trajectories ready");
    BatteryTraining tr = train_battery(s, train, k_max, m_max);
    train.clear();
    say(log, "battery[" + name + "]: POD and EI done in " + io::format_double(tr.seconds) + " s");
    auto cells = sweep(s, tr, b.k_grid, b.m_grid, test, b.dt, b.t_end, c.workers);
    write_sweep_csv(cells, out / ("battery_errors_" + name + ".csv"));
    for (const auto& cell : cells) {
      say(log, "battery[" + name + "]: k " + std::to_string(cell.k) + " M " + std::to_string(cell.m) + " err_c " +
                   io::format_double(cell.err_c) + " err_phi " + io::format_double(cell.err_phi) + " speedup " +
                   io::format_double(cell.speedup) + " failures " + std::to_string(cell.failures));
    }
    return std::make_pair(std::move(tr), std::move(cells));
  };

  auto [dense, dense_cells] = study(res.train_mu, "dense");
  res.dense = std::move(dense_cells);
  {
    io::CsvWriter w(out / "battery_pod.csv", {"index", "sigma_c", "sigma_phi"});
    const Index n = std::max(dense.basis_c.singular_values.size(), dense.basis_phi.singular_values.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (Index i = 0; i < n; ++i) {
      const auto& sc = dense.basis_c.singular_values;
      const auto& sp = dense.basis_phi.singular_values;
      w.write({i + 1, i < sc.size() ? sc[i] : nan, i < sp.size() ? sp[i] : nan});
    }
  }
  {
    io::CsvWriter w(out / "battery_ei.csv", {"M", "greedy_error_1c", "greedy_error_bv"});
    const std::size_t n = std::max(dense.ei_1c.greedy_errors.size(), dense.ei_bv.greedy_errors.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& e1 = dense.ei_1c.greedy_errors;
      const auto& eb = dense.ei_bv.greedy_errors;
      w.write({static_cast<Index>(i), i < e1.size() ? e1[i] : nan, i < eb.size() ? eb[i] : nan});
    }
  }
  {
    const auto& d = s.decomposition;
    fs::create_directories(out / "rom");
    io::write_basis(truncate(dense.basis_c, k_max), out / "rom" / "basis_c.bin");
    io::write_basis(truncate(dense.basis_phi, k_max), out / "rom" / "basis_phi.bin");
    io::write_ei(truncate(dense.ei_1c, m_max, deps_of(d.one_over_c)), out / "rom" / "ei_1c.bin");
    io::write_ei(truncate(dense.ei_bv, m_max, deps_of(d.butler_volmer)), out / "rom" / "ei_bv.bin");
  }
  res.ei_1c = std::move(dense.ei_1c);
  res.ei_bv = std::move(dense.ei_bv);

  if (b.sparse_training) {
    auto [sparse, sparse_cells] = study({b.mu_min, b.mu_max}, "sparse");
    res.sparse = std::move(sparse_cells);
  }
  res.seconds = since(t0);
  say(log, "battery: done in " + io::format_double(res.seconds) + " s (" + std::to_string(cache.hits()) +
               " cached trajectories, " + std::to_string(cache.misses()) + " computed)");
  return res;
}

HeatStudyResult heat_study(const ExperimentConfig& c, const fs::path& out, std::ostream* log) {
  fs::create_directories(out);
  HeatStudyResult res;
  const auto& hc = c.heat;
  const auto t0 = Clock::now();
  const MaterialGrid g = load_geometry(c);
  const Partition p = partition_subdomains(g, hc.blocks);
  const Partition p1 = partition_subdomains(g, {1, 1, 1});
  const HeatModel h = assemble_heat(g, hc.conductivities, hc.options);
  res.setup_seconds = since(t0);

  GreedyOptions o;
  o.training = equidistant(hc.mu_min, hc.mu_max, hc.n_train);
  o.target_rel = hc.target_rel;
  o.max_extensions = hc.max_extensions;
  res.global = pod_greedy(h, GreedyMode::GlobalRb, o);
  say(log, "heat: global RB greedy, " + std::to_string(res.global.log.size() - 1) + " extensions, basis " +
               std::to_string(res.global.global.size()));
  res.lrbms = pod_greedy(h, GreedyMode::Lrbms, o, &p);
  say(log, "heat: LRBMS greedy, " + std::to_string(res.lrbms.log.size() - 1) + " extensions, basis " +
               std::to_string(res.lrbms.local.size()));
  res.single = pod_greedy(h, GreedyMode::Lrbms, o, &p1);

  auto write_log = [&](const GreedyResult& r, const fs::path& path) {
    io::CsvWriter w(path, {"iteration", "worst_mu", "max_error", "basis_size"});
    for (const auto& e : r.log) w.write({e.iteration, e.worst_mu, e.max_error, e.basis_size});
  };
  write_log(res.global, out / "heat_greedy_global.csv");
  write_log(res.lrbms, out / "heat_greedy_lrbms.csv");

  {
    io::CsvWriter w(out / "heat_equivalence.csv", {"iteration", "global_error", "single_subdomain_error", "rel_diff"});
    const std::size_t n = std::max(res.global.log.size(), res.single.log.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < n; ++i) {
      const double a = i < res.global.log.size() ? res.global.log[i].max_error : nan;
      const double b = i < res.single.log.size() ? res.single.log[i].max_error : nan;
      const double rel = std::abs(a - b) / std::abs(a);
      res.equivalence = std::isnan(rel) ? std::numeric_limits<double>::infinity() : std::max(res.equivalence, rel);
      w.write({static_cast<Index>(i), a, b, rel});
    }
  }

  const HeatReducedModel rom = build_heat_rom(h, res.global.global);
  const BlockReducedModel brm = build_block_rom(h, res.lrbms.local);
  for (double mu : o.training) {
    auto t1 = Clock::now();
    (void)heat_rom_solve(rom, mu);
    res.online_global += since(t1);
    t1 = Clock::now();
    (void)block_rom_solve(brm, mu);
    res.online_lrbms += since(t1);
  }
  res.online_global /= static_cast<double>(o.training.size());
  res.online_lrbms /= static_cast<double>(o.training.size());

  {
    io::CsvWriter w(out / "heat_runtime.csv", {"method", "setup_s", "greedy_s", "basis_size", "online_s"});
    w.write({"global_rb", res.setup_seconds, res.global.greedy_seconds, "1x" + std::to_string(res.global.global.size()),
             res.online_global});
    w.write({"lrbms", res.setup_seconds, res.lrbms.greedy_seconds,
             std::to_string(p.n_subdomains()) + "x" + std::to_string(res.lrbms.local.max_local_size()),
             res.online_lrbms});
  }
  say(log, "heat: one-subdomain equivalence " + io::format_double(res.equivalence));
  return res;
}

void geometry_command(const ExperimentConfig& c, const fs::path& out) {
  fs::create_directories(out);
  const MaterialGrid g = load_geometry(c);
  write_geometry(g, out / "geometry.bin");
  const InterfaceSet ifs = extract_interfaces(g);
  std::array<Index, kMaterialCount> bv{};
  for (const auto& f : ifs.bv_faces) {
    ++bv[static_cast<std::size_t>(Material::Electrolyte)];
    ++bv[static_cast<std::size_t>(f.side == ElectrodeSide::Neg ? Material::NegElectrode : Material::PosElectrode)];
  }
  io::CsvWriter w(out / "geometry_stats.csv", {"material", "cells", "volume_fraction", "bv_faces"});
  for (int m = 0; m < kMaterialCount; ++m) {
    const auto mat = static_cast<Material>(m);
    const Index n = g.count(mat);
    w.write({std::string(material_name(mat)), n, static_cast<double>(n) / static_cast<double>(g.n_cells()),
             bv[static_cast<std::size_t>(m)]});
  }
}

void write_battery_summary(const BatterySetup& s, const Trajectory& t, const fs::path& path) {
  const auto& d = s.decomposition;
  const InterfaceSet ifs = extract_interfaces(s.grid);
  const auto pos = ifs.boundary(BoundaryTag::PosCollectorBoundary);
  double area = 0.0;
  for (const auto& f : pos) area += f.area;
  io::CsvWriter w(path, {"time", "c_electrolyte", "c_neg_electrode", "c_pos_electrode", "boundary_voltage"});
  for (Index j = 0; j < t.n_states(); ++j) {
    std::array<double, 3> sum{};
    std::array<double, 3> vol{};
    for (Index i = 0; i < d.layout.n_c; ++i) {
      const auto m = static_cast<std::size_t>(d.c_material[static_cast<std::size_t>(i)]);
      if (m > 2) continue;
      sum[m] += d.c_volume[i] * t.c(i, j);
      vol[m] += d.c_volume[i];
    }
    double v = 0.0;
    for (const auto& f : pos) v += f.area * t.phi(f.cell, j);
    auto avg = [&](std::size_t m) { return vol[m] > 0.0 ? sum[m] / vol[m] : 0.0; };
    w.write({t.times[j], avg(0), avg(1), avg(2), area > 0.0 ? v / area : 0.0});
  }
}

Trajectory fom_run(const ExperimentConfig& c, const fs::path& out, double mu) {
  fs::create_directories(out);
  const BatterySetup s = battery_setup(c);
  FomCache cache(out / "cache", c, s.checksum);
  Trajectory t = cache.get(s, mu, false);
  io::write_trajectory(t, out / "fom_trajectory.bin");
  write_battery_summary(s, t, out / "fom_summary.csv");
  return t;
}

double rom_eval(const ExperimentConfig& c, const fs::path& out, const fs::path& rom_dir, double mu, std::ostream* log) {
  fs::create_directories(out);
  const BatterySetup s = battery_setup(c);
  const auto& d = s.decomposition;
  const ReducedBatteryModel rom =
      build_rom(d, io::read_basis(rom_dir / "basis_c.bin"), io::read_basis(rom_dir / "basis_phi.bin"),
                io::read_ei(rom_dir / "ei_1c.bin"), io::read_ei(rom_dir / "ei_bv.bin"), s.c0);
  const ReducedTrajectory rt =
      rom_simulate(rom, mu, project_concentration(rom, s.c0), c.battery.dt, c.battery.t_end);
  const Trajectory full = reconstruct(rom, rt);
  write_battery_summary(s, full, out / "rom_summary.csv");
  say(log, "rom-eval: k_c " + std::to_string(rom.k_c()) + ", k_phi " + std::to_string(rom.k_phi()) + ", M " +
               std::to_string(rom.ei_1c.size()) + " + " + std::to_string(rom.ei_bv.size()) + ", online " +
               io::format_double(rt.wall_seconds) + " s, " + std::to_string(rt.counters.newton_iterations) +
               " Newton iterations, " + std::to_string(rt.counters.jacobian_evaluations) + " Jacobians, " +
               std::to_string(rt.counters.residual_evaluations) + " residuals");
  const FomCache cache(out / "cache", c, s.checksum);
  if (fs::exists(cache.file(mu))) {
    const std::vector<Trajectory> f{io::read_trajectory(cache.file(mu))};
    const std::vector<Trajectory> r{full};
    say(log, "rom-eval: rel_err_c " + io::format_double(relative_reduction_error(f, r, Field::Concentration)) +
                 ", rel_err_phi " + io::format_double(relative_reduction_error(f, r, Field::Potential)) +
                 ", speedup " + io::format_double(f[0].wall_seconds / rt.wall_seconds));
  }
  return rt.wall_seconds;
}

}  // namespace porerom::cli
