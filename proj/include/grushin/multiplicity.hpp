#pragma once

// Sobolev quotient estimates, the compactness threshold above the first
// solution, and a discretized mountain-pass search for a second solution.

#include <optional>
#include <string>
#include <vector>

#include "grushin/core.hpp"
#include "grushin/discretization.hpp"
#include "grushin/variational.hpp"

namespace grushin {

/// vol u^T A u / (vol sum |u|^q)^{2/q}
double rayleigh_quotient(const OperatorMatrix& A, const Field& u, double q);

/// Bubble sampled on the grid nodes (zero where the cutoff vanishes).
Field sample_bubble(const Grid2D& grid, const GrushinParams& params, const BubbleSpec& spec);

struct SobolevOptions {
  double tol = 1e-9;        // stop when the relative quotient drop per step is below this
  int max_iter = 5000;
  std::optional<double> exponent;  // defaults to the critical exponent (needs Q > 2)
  std::optional<Field> seed;       // defaults to a bump centred in the rectangle
};

struct SobolevEstimate {
  double quotient = 0.0;
  int iterations = 0;
  Field minimizer;  // normalised to unit L^q norm
  std::vector<double> history;
};

/// Minimizes the quotient by A-preconditioned gradient steps with
/// backtracking; the value at stagnation is an upper bound for the infimum.
/// Throws ConvergenceError when max_iter is hit first.
SobolevEstimate sobolev_estimate(const Grid2D& grid, double gamma, const GrushinParams& params,
                                 const SobolevOptions& options = {});
double sobolev_constant(const Grid2D& grid, double gamma, const GrushinParams& params, double tol);

/// S^{Q/2} / (Q lambda^{(Q-2)/2}).
double pass_threshold(double S, double lambda, const GrushinParams& params);

struct MountainPassOptions {
  double tol = 1e-8;             // residual target of the final polish
  int max_sweeps = 400;
  int reparam_every = 10;
  double stagnation = 1e-3;      // relative change of the path maximum between blocks of sweeps
  int climb_iters = 300;
  double climb_step = 0.5;
  double climb_switch = 1e-3;    // hand over to Newton once sup residual is this small
  int newton_max = 40;
  double min_distance = 1e-3;
  bool record_trace = true;
};

struct PathTraceRow {
  int sweep = 0;
  int node = 0;
  double energy = 0.0;  // relative to energy(0)
  double residual = 0.0;
};

struct MountainPassResult {
  bool found = false;
  Field u_second;
  double level = 0.0;         // energy_relative of u_second
  double first_energy = 0.0;  // energy_relative of u_first
  double t0 = 0.0;
  int sweeps = 0;
  int max_node = 0;
  double residual = 0.0;   // sup norm of the PDE residual at u_second
  double distance = 0.0;   // sup norm of u_second - u_first
  double min_excess = 0.0; // min of u_second - u_first
  bool ordered = false;    // u_second >= u_first - 1e-10 everywhere
  bool level_at_first = false;
  std::vector<double> path_max;  // max node energy after each descent sweep
  std::vector<double> path_max_before;  // and before it
  std::vector<PathTraceRow> trace;
  std::vector<Field> path;
  std::string report;
};

/// Elastic-string search between u_first and u_first + t0 direction. Nodes
/// stay in {v >= u_first}; endpoints never move.
MountainPassResult mountain_pass(const EnergyFunctional& F, const Field& u_first, const Field& direction, int n_nodes,
                                 const MountainPassOptions& options = {});

/// CSV `sweep,node,energy,residual`.
void write_path_csv(const std::string& path, const std::vector<PathTraceRow>& trace);

}  // namespace grushin
