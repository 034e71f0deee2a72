#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

#include "ptcosim/netio.hpp"

namespace ptc::powerflow {

using netio::PowerNetwork;

// Branch-flow variables indexed by bus index. Branch quantities (l, P, Q)
// belong to the branch from the bus to its ancestor and are zero at the slack.
struct BranchFlowState {
  std::vector<double> v;  // squared voltage magnitude
  std::vector<double> l;  // squared branch current
  std::vector<double> P;  // branch power towards the ancestor
  std::vector<double> Q;
  std::vector<double> p;  // net injection (generation minus load)
  std::vector<double> q;

  static BranchFlowState flat(const PowerNetwork& pn);
};

struct BusResidual {
  std::complex<double> balance;  // s_i - [S_i - sum_children (S_j - z_j l_j)]
  double voltage = 0.0;          // v_anc - v_i + 2(r P + x Q) - |z|^2 l; zero at the slack
};

std::vector<BusResidual> bfm_residual(const PowerNetwork& pn, const BranchFlowState& st);
// Euclidean norm over every balance and voltage residual.
double residual_norm(const std::vector<BusResidual>& r);

struct PsdTriple {
  double v = 0.0;
  double l = 0.0;
  std::complex<double> S;
};

// Frobenius-norm projection of [[v, S], [conj(S), l]] onto the PSD cone.
PsdTriple psd_project(double v, double l, std::complex<double> S);

// Minimiser of (v-a)^2 + (l-b)^2 + 2|S-c|^2 subject to v l >= |S|^2,
// v in [v_lo, v_hi], l in [0, l_hi].
PsdTriple project_cone_box(double a, double b, std::complex<double> c, double v_lo, double v_hi, double l_hi);

// Generation bounds (p.u.) on a bus, overriding the feeder values.
struct GenerationCap {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
};

// Buses whose generation carries the quadratic cost: the slack, every bus with
// nonzero generation bounds, and every capped bus.
std::vector<bool> cost_buses(const PowerNetwork& pn, const std::vector<GenerationCap>& caps = {});

// sum over cost buses of alpha1 g^2 + beta1 g, with g = p + load_p.
double opf_objective(const PowerNetwork& pn, const BranchFlowState& st, double alpha1, double beta1,
                     const std::vector<GenerationCap>& caps = {});

// max over branches of |v l - |S|^2|.
double exactness_gap(const PowerNetwork& pn, const BranchFlowState& st);

// Consensus copies between the per-bus x blocks (p, q, v, l, P, Q) and the
// per-bus y blocks that carry the linear branch-flow equations.
struct AdmmState {
  std::vector<double> x;       // 6 per bus
  std::vector<double> y;       // one per copy
  std::vector<double> lambda;  // one per copy
  std::vector<double> y_prev;
  std::vector<double> x_hat;  // relaxed x seen by the y and dual steps, per copy
  std::vector<std::size_t> owner;  // x index copied by each copy
  std::vector<double> weight;      // penalty of each copy relative to rho
  std::vector<std::size_t> block;  // first copy of each bus's y block, plus end
  double rho = 1.0;
  int iteration = 0;
  double primal = 0.0;
  double dual = 0.0;
};

// Relative penalty of the voltage, current and injection copies. Branch power
// copies take 2 sqrt(v l) so the cone step stays a Frobenius projection.
struct PenaltyScale {
  double v = 1.0;
  double l = 1.0;
  double pq = 1.0;
};

struct OpfOptions {
  double alpha1 = 1.0;
  double beta1 = 0.0;
  double rho = 30.0;
  double eps = 1e-5;
  int max_iter = 5000;
  int threads = 1;
  bool balance_rho = false;  // residual balancing of rho
  int balance_period = 50;  // iterations between penalty adjustments
  double relaxation = 1.0;  // over-relaxation factor in (0, 2)
  PenaltyScale scale;
  int memory = 15;          // Anderson history length, 0 disables
  double safeguard = 1.0;   // reset the history when the fixed-point residual grows past this factor
  // Called after every iteration with (k, primal, dual, objective).
  std::function<void(int, double, double, double)> trace;
};

AdmmState admm_init(const PowerNetwork& pn, double rho, const PenaltyScale& scale = {});
void admm_x_update(AdmmState& s, const PowerNetwork& pn, const std::vector<GenerationCap>& caps,
                   const OpfOptions& opt);
void admm_y_update(AdmmState& s, const PowerNetwork& pn, int threads = 1, double relaxation = 1.0);
// lambda <- lambda + rho w (x_hat - y), then refreshes the residual norms.
void admm_dual_update(AdmmState& s);
BranchFlowState admm_state(const AdmmState& s, std::size_t bus_count);

struct OpfSolution {
  BranchFlowState state;
  double objective = 0.0;
  std::vector<double> injections;  // generation on each capped bus, p.u., cap order
  double gap = 0.0;
  int iterations = 0;
  bool converged = false;
  double primal = 0.0;
  double dual = 0.0;
  double rho = 0.0;  // final penalty
};

// Slack generation is unbounded. Throws ErrorKind::Infeasible when the boxes
// cannot cover the load and ErrorKind::Divergence on non-finite iterates.
OpfSolution solve_opf(const PowerNetwork& pn, const std::vector<GenerationCap>& caps = {},
                      const OpfOptions& opt = {});

// Copy of `pn` with every bus load multiplied by `factor`.
PowerNetwork scale_loads(const PowerNetwork& pn, double factor);

}  // namespace ptc::powerflow
