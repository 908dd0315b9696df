#pragma once

#include <Eigen/Core>
#include <complex>
#include <iosfwd>
#include <vector>

namespace evload {

enum class BusType { Slack, Pq };

struct Bus {
  int id = 0;
  BusType type = BusType::Pq;
};

struct Line {
  int from = 0;
  int to = 0;
  double r = 0.0;  // per-unit series resistance
  double x = 0.0;  // per-unit series reactance
};

// Time series of per-unit constant-power loads. Column j carries the load at
// bus_ids[j]; buses not listed draw nothing.
struct LoadProfile {
  std::vector<int> bus_ids;
  Eigen::MatrixXd p;  // timesteps x bus_ids.size()
  Eigen::MatrixXd q;

  Eigen::Index timesteps() const { return p.rows(); }
};

struct GridCase {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  double base_mva = 1.0;
  LoadProfile loads;
};

// Exactly one slack bus, unique ids, every line endpoint present, the graph
// connected, r >= 0, x >= 0, r + x > 0. Throws InvalidConfig otherwise.
void validate_grid_case(const GridCase& grid);

constexpr double kDefaultPowerFactor = 0.95;

// Reactive power for a lagging power factor in (0, 1].
double q_from_p(double p, double power_factor = kDefaultPowerFactor);

// Builds a LoadProfile from active power alone, deriving Q from the power
// factor.
LoadProfile make_profile(std::vector<int> bus_ids, Eigen::MatrixXd p,
                         double power_factor = kDefaultPowerFactor);

// Radial feeder: bus 0 is the slack, buses i-1 and i are joined by a segment
// with r = 0.01, x = 0.03 per unit. The profile, when given, becomes the
// case's load set and must reference existing non-slack buses.
GridCase build_fixture_case(int n_buses, const LoadProfile* profile = nullptr);

struct VoltageSolutionSlice {
  Eigen::VectorXd vm;  // per-unit magnitude, one entry per bus
  Eigen::VectorXd va;  // radians
  int iterations = 0;
  double final_mismatch = 0.0;
};

// Newton-Raphson in polar form from a flat start. p_load/q_load are indexed
// by bus position and count consumption as positive. Throws NonConvergence
// when the mismatch fails to reach tol within max_iter iterations.
VoltageSolutionSlice solve_injections(const GridCase& grid,
                                      const Eigen::VectorXd& p_load,
                                      const Eigen::VectorXd& q_load,
                                      double tol = 1e-8, int max_iter = 50);

// Solves one timestep of the case's own load profile.
VoltageSolutionSlice solve_power_flow(const GridCase& grid,
                                      Eigen::Index timestep, double tol = 1e-8,
                                      int max_iter = 50);

// Complex power injected into the grid at one bus, from solved voltages.
std::complex<double> bus_power(const GridCase& grid,
                               const VoltageSolutionSlice& solution,
                               std::size_t bus_index);

// Active power dissipated across all lines.
double total_line_losses(const GridCase& grid,
                         const VoltageSolutionSlice& solution);

struct DeviationReport {
  Eigen::MatrixXd dv;  // timesteps x buses: |V|_predicted - |V|_actual
  double max_abs = 0.0;
  Eigen::Index worst_timestep = 0;
  std::size_t worst_bus = 0;  // bus position in the case
};

// Solves both profiles timestep by timestep and reports the voltage
// magnitude deviations. Profiles must agree on buses and length
// (ProfileMismatch); solver failures carry the offending timestep.
DeviationReport compare_profiles(const GridCase& grid,
                                 const LoadProfile& actual,
                                 const LoadProfile& predicted,
                                 double tol = 1e-8, int max_iter = 50);

// {"base_mva":..., "buses":[{"id","type"}...], "lines":[{"from","to","r","x"}...]}
GridCase read_grid_case_json(std::istream& in);
void write_grid_case_json(const GridCase& grid, std::ostream& out);

// timestep,bus_id,p_pu,q_pu with 0-based contiguous timesteps
LoadProfile read_load_profile_csv(std::istream& in);
void write_load_profile_csv(const LoadProfile& profile, std::ostream& out);

// timestep,bus_id,dv_pu
void write_deviation_csv(const DeviationReport& report, const GridCase& grid,
                         std::ostream& out);
void write_deviation_summary_json(const DeviationReport& report,
                                  const GridCase& grid, std::ostream& out);

}  // namespace evload
