#include "evload/gridval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include "json.hpp"
#include <ostream>
#include <string>

#include "evload/csvio.hpp"
#include "evload/errors.hpp"
#include "evload/format.hpp"

namespace evload {

namespace {

std::size_t bus_index_of(const GridCase& grid, int bus_id) {
  for (std::size_t i = 0; i < grid.buses.size(); ++i) {
    if (grid.buses[i].id == bus_id) return i;
  }
  throw InvalidConfig("bus " + std::to_string(bus_id) + " not in the case");
}

Eigen::MatrixXcd admittance_matrix(const GridCase& grid) {
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const Line& line : grid.lines) {
    const auto i = static_cast<Eigen::Index>(bus_index_of(grid, line.from));
    const auto j = static_cast<Eigen::Index>(bus_index_of(grid, line.to));
    const std::complex<double> series = 1.0 / std::complex<double>(line.r, line.x);
    y(i, i) += series;
    y(j, j) += series;
    y(i, j) -= series;
    y(j, i) -= series;
  }
  return y;
}

}  // namespace

void validate_grid_case(const GridCase& grid) {
  if (grid.buses.empty()) throw InvalidConfig("case has no buses");
  if (!(grid.base_mva > 0.0)) throw InvalidConfig("base_mva must be positive");

  int slack_count = 0;
  for (const Bus& b : grid.buses) {
    if (b.type == BusType::Slack) ++slack_count;
  }
  if (slack_count != 1) {
    throw InvalidConfig("case must have exactly one slack bus");
  }
  for (std::size_t i = 0; i < grid.buses.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.buses.size(); ++j) {
      if (grid.buses[i].id == grid.buses[j].id) {
        throw InvalidConfig("duplicate bus id " +
                            std::to_string(grid.buses[i].id));
      }
    }
  }
  for (const Line& line : grid.lines) {
    bus_index_of(grid, line.from);
    bus_index_of(grid, line.to);
    if (line.from == line.to) throw InvalidConfig("line joins a bus to itself");
    if (line.r < 0.0 || line.x < 0.0 || line.r + line.x <= 0.0) {
      throw InvalidConfig("line impedance must be non-negative and nonzero");
    }
  }
  // Connectivity sweep from the first bus.
  std::vector<char> seen(grid.buses.size(), 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const std::size_t at = stack.back();
    stack.pop_back();
    for (const Line& line : grid.lines) {
      const std::size_t a = bus_index_of(grid, line.from);
      const std::size_t b = bus_index_of(grid, line.to);
      if (a == at && !seen[b]) {
        seen[b] = 1;
        stack.push_back(b);
      } else if (b == at && !seen[a]) {
        seen[a] = 1;
        stack.push_back(a);
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw InvalidConfig("case graph is not connected");
  }
  for (int id : grid.loads.bus_ids) {
    const std::size_t at = bus_index_of(grid, id);
    if (grid.buses[at].type == BusType::Slack) {
      throw InvalidConfig("load profile targets the slack bus");
    }
  }
  if (grid.loads.p.rows() != grid.loads.q.rows() ||
      grid.loads.p.cols() != grid.loads.q.cols() ||
      grid.loads.p.cols() != static_cast<Eigen::Index>(grid.loads.bus_ids.size())) {
    throw InvalidConfig("load profile matrices disagree with its bus list");
  }
}

double q_from_p(double p, double power_factor) {
  if (!(power_factor > 0.0) || power_factor > 1.0) {
    throw InvalidConfig("power factor must lie in (0, 1]");
  }
  return p * std::tan(std::acos(power_factor));
}

LoadProfile make_profile(std::vector<int> bus_ids, Eigen::MatrixXd p,
                         double power_factor) {
  if (p.cols() != static_cast<Eigen::Index>(bus_ids.size())) {
    throw ProfileMismatch("profile needs one column per bus");
  }
  LoadProfile profile;
  profile.bus_ids = std::move(bus_ids);
  profile.q = p.unaryExpr(
      [power_factor](double v) { return q_from_p(v, power_factor); });
  profile.p = std::move(p);
  return profile;
}

GridCase build_fixture_case(int n_buses, const LoadProfile* profile) {
  if (n_buses < 2) throw InvalidConfig("feeder needs at least 2 buses");
  GridCase grid;
  grid.base_mva = 1.0;
  grid.buses.push_back({0, BusType::Slack});
  for (int i = 1; i < n_buses; ++i) {
    grid.buses.push_back({i, BusType::Pq});
    grid.lines.push_back({i - 1, i, 0.01, 0.03});
  }
  if (profile) grid.loads = *profile;
  validate_grid_case(grid);
  return grid;
}

VoltageSolutionSlice solve_injections(const GridCase& grid,
                                      const Eigen::VectorXd& p_load,
                                      const Eigen::VectorXd& q_load,
                                      double tol, int max_iter) {
  validate_grid_case(grid);
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  if (p_load.size() != n || q_load.size() != n) {
    throw ProfileMismatch("load vectors must have one entry per bus");
  }
  if (!(tol > 0.0) || max_iter < 1) {
    throw InvalidConfig("solver needs tol > 0 and max_iter >= 1");
  }

  const Eigen::MatrixXcd ybus = admittance_matrix(grid);
  const Eigen::MatrixXd G = ybus.real();
  const Eigen::MatrixXd B = ybus.imag();

  std::vector<Eigen::Index> pq;  // solved buses, in case order
  for (Eigen::Index i = 0; i < n; ++i) {
    if (grid.buses[i].type == BusType::Pq) pq.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(pq.size());

  // Consumption counts as negative injection.
  const Eigen::VectorXd p_spec = -p_load;
  const Eigen::VectorXd q_spec = -q_load;

  VoltageSolutionSlice sol;
  sol.vm = Eigen::VectorXd::Ones(n);
  sol.va = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd p_calc(n), q_calc(n);
  auto compute_injections = [&]() {
    for (Eigen::Index i = 0; i < n; ++i) {
      double pi = 0.0, qi = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double th = sol.va(i) - sol.va(j);
        const double c = std::cos(th), s = std::sin(th);
        pi += sol.vm(j) * (G(i, j) * c + B(i, j) * s);
        qi += sol.vm(j) * (G(i, j) * s - B(i, j) * c);
      }
      p_calc(i) = sol.vm(i) * pi;
      q_calc(i) = sol.vm(i) * qi;
    }
  };
  auto max_mismatch = [&]() {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index i = pq[k];
      worst = std::max(worst, std::abs(p_spec(i) - p_calc(i)));
      worst = std::max(worst, std::abs(q_spec(i) - q_calc(i)));
    }
    return worst;
  };

  compute_injections();
  double mismatch = max_mismatch();
  int iter = 0;
  while (mismatch > tol) {
    if (iter >= max_iter) {
      throw NonConvergence("power flow still at mismatch " +
                               format_double(mismatch) + " pu after " +
                               std::to_string(iter) + " iterations",
                           mismatch, iter);
    }
    // Jacobian in polar form over the PQ unknowns: [dP;dQ] / [dtheta;dV].
    Eigen::MatrixXd jac(2 * m, 2 * m);
    for (Eigen::Index a = 0; a < m; ++a) {
      const Eigen::Index i = pq[a];
      for (Eigen::Index b = 0; b < m; ++b) {
        const Eigen::Index j = pq[b];
        if (i == j) {
          jac(a, b) = -q_calc(i) - B(i, i) * sol.vm(i) * sol.vm(i);
          jac(a, m + b) = p_calc(i) / sol.vm(i) + G(i, i) * sol.vm(i);
          jac(m + a, b) = p_calc(i) - G(i, i) * sol.vm(i) * sol.vm(i);
          jac(m + a, m + b) = q_calc(i) / sol.vm(i) - B(i, i) * sol.vm(i);
        } else {
          const double th = sol.va(i) - sol.va(j);
          const double c = std::cos(th), s = std::sin(th);
          const double gs_bc = G(i, j) * s - B(i, j) * c;
          const double gc_bs = G(i, j) * c + B(i, j) * s;
          jac(a, b) = sol.vm(i) * sol.vm(j) * gs_bc;
          jac(a, m + b) = sol.vm(i) * gc_bs;
          jac(m + a, b) = -sol.vm(i) * sol.vm(j) * gc_bs;
          jac(m + a, m + b) = sol.vm(i) * gs_bc;
        }
      }
    }
    Eigen::VectorXd rhs(2 * m);
    for (Eigen::Index k = 0; k < m; ++k) {
      rhs(k) = p_spec(pq[k]) - p_calc(pq[k]);
      rhs(m + k) = q_spec(pq[k]) - q_calc(pq[k]);
    }
    const Eigen::VectorXd step = jac.partialPivLu().solve(rhs);
    if (!step.allFinite()) {
      throw NonConvergence("power flow produced a non-finite update", mismatch,
                           iter);
    }
    for (Eigen::Index k = 0; k < m; ++k) {
      sol.va(pq[k]) += step(k);
      sol.vm(pq[k]) += step(m + k);
    }
    ++iter;
    compute_injections();
    mismatch = max_mismatch();
    if (!std::isfinite(mismatch)) {
      throw NonConvergence("power flow mismatch became non-finite", mismatch,
                           iter);
    }
  }
  sol.iterations = iter;
  sol.final_mismatch = mismatch;
  return sol;
}

namespace {

// Expands a profile row into per-bus load vectors.
void profile_row(const GridCase& grid, const LoadProfile& profile,
                 Eigen::Index t, Eigen::VectorXd& p, Eigen::VectorXd& q) {
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  p = Eigen::VectorXd::Zero(n);
  q = Eigen::VectorXd::Zero(n);
  for (std::size_t c = 0; c < profile.bus_ids.size(); ++c) {
    const auto at = static_cast<Eigen::Index>(
        bus_index_of(grid, profile.bus_ids[c]));
    p(at) = profile.p(t, static_cast<Eigen::Index>(c));
    q(at) = profile.q(t, static_cast<Eigen::Index>(c));
  }
}

}  // namespace

VoltageSolutionSlice solve_power_flow(const GridCase& grid,
                                      Eigen::Index timestep, double tol,
                                      int max_iter) {
  if (timestep < 0 || timestep >= grid.loads.timesteps()) {
    throw InvalidSize("timestep outside the load profile");
  }
  Eigen::VectorXd p, q;
  profile_row(grid, grid.loads, timestep, p, q);
  return solve_injections(grid, p, q, tol, max_iter);
}

std::complex<double> bus_power(const GridCase& grid,
                               const VoltageSolutionSlice& solution,
                               std::size_t bus_index) {
  const Eigen::MatrixXcd ybus = admittance_matrix(grid);
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  const auto i = static_cast<Eigen::Index>(bus_index);
  std::complex<double> current(0.0, 0.0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::complex<double> vj =
        std::polar(solution.vm(j), solution.va(j));
    current += ybus(i, j) * vj;
  }
  const std::complex<double> vi = std::polar(solution.vm(i), solution.va(i));
  return vi * std::conj(current);
}

double total_line_losses(const GridCase& grid,
                         const VoltageSolutionSlice& solution) {
  double losses = 0.0;
  for (const Line& line : grid.lines) {
    const auto i = static_cast<Eigen::Index>(bus_index_of(grid, line.from));
    const auto j = static_cast<Eigen::Index>(bus_index_of(grid, line.to));
    const std::complex<double> vi = std::polar(solution.vm(i), solution.va(i));
    const std::complex<double> vj = std::polar(solution.vm(j), solution.va(j));
    const std::complex<double> current =
        (vi - vj) / std::complex<double>(line.r, line.x);
    losses += line.r * std::norm(current);
  }
  return losses;
}

DeviationReport compare_profiles(const GridCase& grid,
                                 const LoadProfile& actual,
                                 const LoadProfile& predicted, double tol,
                                 int max_iter) {
  if (actual.bus_ids != predicted.bus_ids) {
    throw ProfileMismatch("profiles cover different buses");
  }
  if (actual.timesteps() != predicted.timesteps()) {
    throw ProfileMismatch("profiles cover different horizons");
  }
  if (actual.timesteps() == 0) throw ProfileMismatch("profiles are empty");

  GridCase scenario = grid;
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  DeviationReport report;
  report.dv.resize(actual.timesteps(), n);

  auto solve_scenario = [&](const LoadProfile& profile, Eigen::Index t,
                            const char* label) {
    scenario.loads = profile;
    try {
      return solve_power_flow(scenario, t, tol, max_iter);
    } catch (const NonConvergence& e) {
      throw NonConvergence(std::string(label) + " profile at timestep " +
                               std::to_string(t) + ": " + e.what(),
                           e.final_mismatch(), e.iterations());
    }
  };

  for (Eigen::Index t = 0; t < actual.timesteps(); ++t) {
    const VoltageSolutionSlice base = solve_scenario(actual, t, "actual");
    const VoltageSolutionSlice pred = solve_scenario(predicted, t, "predicted");
    for (Eigen::Index b = 0; b < n; ++b) {
      const double dv = pred.vm(b) - base.vm(b);
      report.dv(t, b) = dv;
      if (std::abs(dv) > report.max_abs) {
        report.max_abs = std::abs(dv);
        report.worst_timestep = t;
        report.worst_bus = static_cast<std::size_t>(b);
      }
    }
  }
  return report;
}

GridCase read_grid_case_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader(std::string("unreadable grid case: ") + e.what());
  }
  GridCase grid;
  try {
    grid.base_mva = j.value("base_mva", 1.0);
    for (const auto& bj : j.at("buses")) {
      Bus b;
      b.id = bj.at("id").get<int>();
      const std::string type = bj.at("type").get<std::string>();
      if (type == "slack") {
        b.type = BusType::Slack;
      } else if (type == "pq") {
        b.type = BusType::Pq;
      } else {
        throw MalformedHeader("unknown bus type '" + type + "'");
      }
      grid.buses.push_back(b);
    }
    for (const auto& lj : j.at("lines")) {
      grid.lines.push_back({lj.at("from").get<int>(), lj.at("to").get<int>(),
                            lj.at("r").get<double>(),
                            lj.at("x").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader(std::string("incomplete grid case: ") + e.what());
  }
  validate_grid_case(grid);
  return grid;
}

void write_grid_case_json(const GridCase& grid, std::ostream& out) {
  nlohmann::ordered_json j;
  j["base_mva"] = grid.base_mva;
  j["buses"] = nlohmann::ordered_json::array();
  for (const Bus& b : grid.buses) {
    j["buses"].push_back(
        {{"id", b.id}, {"type", b.type == BusType::Slack ? "slack" : "pq"}});
  }
  j["lines"] = nlohmann::ordered_json::array();
  for (const Line& l : grid.lines) {
    j["lines"].push_back(
        {{"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}});
  }
  out << j.dump(2) << '\n';
}

LoadProfile read_load_profile_csv(std::istream& in) {
  CsvReader reader(in);
  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!reader.next_row(fields, line)) {
    throw EmptyInput("load profile has no header row");
  }
  if (fields != std::vector<std::string>{"timestep", "bus_id", "p_pu", "q_pu"}) {
    throw MalformedHeader(
        "load profile header must be timestep,bus_id,p_pu,q_pu");
  }
  std::map<std::pair<long long, long long>, std::pair<double, double>> cells;
  long long max_t = -1;
  std::vector<int> bus_ids;
  while (reader.next_row(fields, line)) {
    if (fields.size() != 4) {
      throw MalformedHeader("load row at line " + std::to_string(line) +
                            " needs 4 fields");
    }
    const auto t = parse_int(fields[0]);
    const auto bus = parse_int(fields[1]);
    const auto p = parse_double(fields[2]);
    const auto q = parse_double(fields[3]);
    if (!t || !bus || !p || !q || *t < 0) {
      throw MalformedHeader("bad load row at line " + std::to_string(line));
    }
    if (!cells.emplace(std::make_pair(*t, *bus), std::make_pair(*p, *q)).second) {
      throw MalformedHeader("duplicate load entry at line " +
                            std::to_string(line));
    }
    max_t = std::max(max_t, *t);
    if (std::find(bus_ids.begin(), bus_ids.end(), static_cast<int>(*bus)) ==
        bus_ids.end()) {
      bus_ids.push_back(static_cast<int>(*bus));
    }
  }
  if (max_t < 0) throw EmptyInput("load profile has no data rows");

  std::sort(bus_ids.begin(), bus_ids.end());
  LoadProfile profile;
  profile.bus_ids = bus_ids;
  profile.p = Eigen::MatrixXd::Zero(max_t + 1, bus_ids.size());
  profile.q = Eigen::MatrixXd::Zero(max_t + 1, bus_ids.size());
  for (const auto& [key, val] : cells) {
    const auto col = static_cast<Eigen::Index>(
        std::find(bus_ids.begin(), bus_ids.end(), static_cast<int>(key.second)) -
        bus_ids.begin());
    profile.p(key.first, col) = val.first;
    profile.q(key.first, col) = val.second;
  }
  return profile;
}

void write_load_profile_csv(const LoadProfile& profile, std::ostream& out) {
  out << "timestep,bus_id,p_pu,q_pu\n";
  for (Eigen::Index t = 0; t < profile.timesteps(); ++t) {
    for (std::size_t c = 0; c < profile.bus_ids.size(); ++c) {
      out << t << ',' << profile.bus_ids[c] << ','
          << format_double(profile.p(t, static_cast<Eigen::Index>(c))) << ','
          << format_double(profile.q(t, static_cast<Eigen::Index>(c))) << '\n';
    }
  }
}

void write_deviation_csv(const DeviationReport& report, const GridCase& grid,
                         std::ostream& out) {
  out << "timestep,bus_id,dv_pu\n";
  for (Eigen::Index t = 0; t < report.dv.rows(); ++t) {
    for (Eigen::Index b = 0; b < report.dv.cols(); ++b) {
      out << t << ',' << grid.buses[static_cast<std::size_t>(b)].id << ','
          << format_double(report.dv(t, b)) << '\n';
    }
  }
}

void write_deviation_summary_json(const DeviationReport& report,
                                  const GridCase& grid, std::ostream& out) {
  nlohmann::ordered_json j;
  j["max_abs_deviation_pu"] = report.max_abs;
  j["worst_bus_id"] = grid.buses[report.worst_bus].id;
  j["worst_timestep"] = report.worst_timestep;
  j["timesteps"] = report.dv.rows();
  j["buses"] = nlohmann::ordered_json::array();
  for (const Bus& b : grid.buses) j["buses"].push_back(b.id);
  out << j.dump(2) << '\n';
}

}  // namespace evload
