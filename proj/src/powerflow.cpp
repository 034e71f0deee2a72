#include "ptcosim/powerflow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "parallel.hpp"
#include "ptcosim/error.hpp"

namespace ptc::powerflow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kP = 0, kQ = 1, kV = 2, kL = 3, kBP = 4, kBQ = 5;

std::size_t xi(std::size_t bus, std::size_t field) { return 6 * bus + field; }

// Projection of a Hermitian block onto the PSD cone by eigenvalue clipping.
Eigen::MatrixXcd project_psd_block(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

// min (l-b)^2 + 2(s-sigma)^2 s.t. V l >= s^2, l >= 0, with sigma >= 0.
std::pair<double, double> fixed_side(double V, double b, double sigma) {
  if (sigma <= 0.0 || V <= 0.0) return {std::max(b, 0.0), 0.0};
  if (b > 0.0 && V * b >= sigma * sigma) return {b, sigma};
  auto h = [&](double mu) {
    const double s = 2.0 * sigma / (2.0 + mu);
    return V * (b + 0.5 * mu * V) - s * s;
  };
  double lo = 0.0, hi = 1.0;
  while (h(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) < 0.0 ? lo : hi) = mid;
  }
  const double s = 2.0 * sigma / (2.0 + hi);
  return {s * s / V, s};
}

struct Candidate {
  double v, l, s;
};

struct GenBox {
  double p_lo, p_hi, q_lo, q_hi;
};

std::vector<GenBox> generation_boxes(const PowerNetwork& pn, const std::vector<GenerationCap>& caps) {
  std::vector<GenBox> box(pn.bus_count());
  for (std::size_t i = 0; i < pn.bus_count(); ++i) {
    const auto& b = pn.buses()[i];
    box[i] = {b.gen_p_min, b.gen_p_max, b.gen_q_min, b.gen_q_max};
  }
  for (const auto& c : caps) {
    if (!pn.has_bus(c.bus)) fail(ErrorKind::InvalidArgument, "generation cap on unknown bus " + std::to_string(c.bus));
    if (!(c.p_min <= c.p_max))
      fail(ErrorKind::Infeasible, "generation cap on bus " + std::to_string(c.bus) + " has p_min > p_max");
    auto& g = box[pn.bus_index(c.bus)];
    g.p_lo = c.p_min;
    g.p_hi = c.p_max;
  }
  const std::size_t s = pn.slack_index();
  box[s] = {-kInf, kInf, -kInf, kInf};
  return box;
}

}  // namespace

BranchFlowState BranchFlowState::flat(const PowerNetwork& pn) {
  const std::size_t n = pn.bus_count();
  BranchFlowState st{std::vector<double>(n, 1.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                     std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    st.p[i] = -pn.buses()[i].load.real();
    st.q[i] = -pn.buses()[i].load.imag();
  }
  st.v[pn.slack_index()] = pn.slack_v();
  return st;
}

std::vector<BusResidual> bfm_residual(const PowerNetwork& pn, const BranchFlowState& st) {
  const std::size_t n = pn.bus_count();
  for (const auto* vec : {&st.v, &st.l, &st.P, &st.Q, &st.p, &st.q})
    if (vec->size() != n) fail(ErrorKind::InvalidArgument, "state dimension does not match the feeder");
  std::vector<BusResidual> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool slack = i == pn.slack_index();
    std::complex<double> S = slack ? 0.0 : std::complex<double>(st.P[i], st.Q[i]);
    std::complex<double> inflow = 0.0;
    for (std::size_t j : pn.children(i)) {
      const auto z = pn.branches()[pn.branch_of(j)].z;
      inflow += std::complex<double>(st.P[j], st.Q[j]) - z * st.l[j];
    }
    out[i].balance = std::complex<double>(st.p[i], st.q[i]) - (S - inflow);
    if (!slack) {
      const auto z = pn.branches()[pn.branch_of(i)].z;
      out[i].voltage = st.v[pn.parent(i)] - st.v[i] + 2.0 * (z.real() * st.P[i] + z.imag() * st.Q[i]) -
                       std::norm(z) * st.l[i];
    }
  }
  return out;
}

double residual_norm(const std::vector<BusResidual>& r) {
  double sq = 0.0;
  for (const auto& b : r) sq += std::norm(b.balance) + b.voltage * b.voltage;
  return std::sqrt(sq);
}

PsdTriple psd_project(double v, double l, std::complex<double> S) {
  Eigen::MatrixXcd m(2, 2);
  m << v, S, std::conj(S), l;
  const auto p = project_psd_block(m);
  return {p(0, 0).real(), p(1, 1).real(), p(0, 1)};
}

PsdTriple project_cone_box(double a, double b, std::complex<double> c, double v_lo, double v_hi, double l_hi) {
  const double sigma = std::abs(c);
  const std::complex<double> dir = sigma > 0.0 ? c / sigma : std::complex<double>(0.0);
  auto out = [&](const Candidate& k) { return PsdTriple{k.v, k.l, k.s * dir}; };
  auto cost = [&](const Candidate& k) {
    return (k.v - a) * (k.v - a) + (k.l - b) * (k.l - b) + 2.0 * (k.s - sigma) * (k.s - sigma);
  };
  const double tol = 1e-12;
  auto in_box = [&](const Candidate& k) {
    return k.v >= v_lo - tol * (1 + std::abs(v_lo)) && k.v <= v_hi + tol * (1 + std::abs(v_hi)) && k.l >= -tol &&
           k.l <= l_hi + tol * (1 + l_hi);
  };

  // Cone only: closed-form eigenvalue clipping of [[a, sigma], [sigma, b]].
  {
    const double m = 0.5 * (a + b), rad = std::hypot(0.5 * (a - b), sigma);
    const double top = m + rad, bottom = m - rad;
    Candidate k{a, b, sigma};
    if (top <= 0.0) {
      k = {0.0, 0.0, 0.0};
    } else if (bottom < 0.0) {
      const double cos2 = 0.5 * (a - b) / rad;
      k = {0.5 * top * (1.0 + cos2), 0.5 * top * (1.0 - cos2), 0.5 * top * sigma / rad};
    }
    if (in_box(k)) return out(k);
  }

  // Some box bound is active: enumerate the faces.
  Candidate best{0, 0, 0};
  double best_cost = kInf;
  auto consider = [&](const Candidate& k) {
    if (!in_box(k)) return;
    const double f = cost(k);
    if (f < best_cost) best_cost = f, best = k;
  };
  for (double V : {v_lo, v_hi}) {
    auto [l, s] = fixed_side(V, b, sigma);
    consider({V, l, s});
    for (double L : {0.0, l_hi}) consider({V, L, std::min(sigma, std::sqrt(std::max(0.0, V * L)))});
  }
  for (double L : {0.0, l_hi}) {
    auto [v, s] = fixed_side(L, a, sigma);
    consider({v, L, s});
  }
  if (best_cost == kInf) fail(ErrorKind::Infeasible, "empty voltage/current box");
  return out(best);
}

std::vector<bool> cost_buses(const PowerNetwork& pn, const std::vector<GenerationCap>& caps) {
  std::vector<bool> out(pn.bus_count(), false);
  for (std::size_t i = 0; i < pn.bus_count(); ++i) {
    const auto& b = pn.buses()[i];
    out[i] = b.gen_p_min != 0.0 || b.gen_p_max != 0.0;
  }
  for (const auto& c : caps) out[pn.bus_index(c.bus)] = true;
  out[pn.slack_index()] = true;
  return out;
}

double opf_objective(const PowerNetwork& pn, const BranchFlowState& st, double alpha1, double beta1,
                     const std::vector<GenerationCap>& caps) {
  const auto cb = cost_buses(pn, caps);
  double f = 0.0;
  for (std::size_t i = 0; i < pn.bus_count(); ++i) {
    if (!cb[i]) continue;
    const double g = st.p[i] + pn.buses()[i].load.real();
    f += alpha1 * g * g + beta1 * g;
  }
  return f;
}

double exactness_gap(const PowerNetwork& pn, const BranchFlowState& st) {
  double gap = 0.0;
  for (std::size_t i = 0; i < pn.bus_count(); ++i) {
    if (i == pn.slack_index()) continue;
    gap = std::max(gap, std::abs(st.v[i] * st.l[i] - st.P[i] * st.P[i] - st.Q[i] * st.Q[i]));
  }
  return gap;
}

// y block of bus i: [p, q, v] own copies; for a non-slack bus also [l, P, Q]
// of its branch and the ancestor voltage; then [l_j, P_j, Q_j] per child j.
AdmmState admm_init(const PowerNetwork& pn, double rho, const PenaltyScale& k) {
  const std::size_t n = pn.bus_count();
  AdmmState s;
  s.rho = rho;
  s.x.assign(6 * n, 0.0);
  const auto flat = BranchFlowState::flat(pn);
  for (std::size_t i = 0; i < n; ++i) {
    s.x[xi(i, kP)] = flat.p[i];
    s.x[xi(i, kQ)] = flat.q[i];
    s.x[xi(i, kV)] = flat.v[i];
  }
  auto add = [&](std::size_t owner, double w) {
    s.owner.push_back(owner);
    s.weight.push_back(w);
  };
  const double ks = std::sqrt(k.v * k.l);
  auto v_weight = [&](std::size_t bus) { return k.v / (1.0 + static_cast<double>(pn.children(bus).size())); };
  for (std::size_t i = 0; i < n; ++i) {
    s.block.push_back(s.owner.size());
    add(xi(i, kP), k.pq);
    add(xi(i, kQ), k.pq);
    add(xi(i, kV), v_weight(i));
    if (i != pn.slack_index()) {
      add(xi(i, kL), 0.5 * k.l);
      add(xi(i, kBP), ks);
      add(xi(i, kBQ), ks);
      add(xi(pn.parent(i), kV), v_weight(pn.parent(i)));
    }
    for (std::size_t j : pn.children(i)) {
      add(xi(j, kL), 0.5 * k.l);
      add(xi(j, kBP), ks);
      add(xi(j, kBQ), ks);
    }
  }
  s.block.push_back(s.owner.size());
  s.y.resize(s.owner.size());
  for (std::size_t c = 0; c < s.y.size(); ++c) s.y[c] = s.x[s.owner[c]];
  s.y_prev = s.y;
  s.lambda.assign(s.y.size(), 0.0);
  return s;
}

void admm_x_update(AdmmState& s, const PowerNetwork& pn, const std::vector<GenerationCap>& caps,
                   const OpfOptions& opt) {
  const std::size_t n = pn.bus_count();
  std::vector<double> num(6 * n, 0.0), den(6 * n, 0.0);
  for (std::size_t c = 0; c < s.y.size(); ++c) {
    const double w = s.rho * s.weight[c];
    num[s.owner[c]] += w * s.y[c] - s.lambda[c];
    den[s.owner[c]] += w;
  }
  const auto box = generation_boxes(pn, caps);
  const auto cb = cost_buses(pn, caps);
  parallel_for(n, opt.threads, [&](std::size_t i) {
    const auto& bus = pn.buses()[i];
    auto target = [&](std::size_t f) { return num[xi(i, f)] / den[xi(i, f)]; };
    const double load_p = bus.load.real(), load_q = bus.load.imag();

    const double Wp = den[xi(i, kP)];
    double p = cb[i] ? (Wp * target(kP) - opt.beta1 - 2.0 * opt.alpha1 * load_p) / (2.0 * opt.alpha1 + Wp)
                     : target(kP);
    s.x[xi(i, kP)] = std::clamp(p, box[i].p_lo - load_p, box[i].p_hi - load_p);
    s.x[xi(i, kQ)] = std::clamp(target(kQ), box[i].q_lo - load_q, box[i].q_hi - load_q);

    if (i == pn.slack_index()) {
      s.x[xi(i, kV)] = pn.slack_v();
      return;
    }
    const auto& br = pn.branches()[pn.branch_of(i)];
    // Weights (kv, kl, 2 sqrt(kv kl)) become Frobenius weights after rescaling.
    const double sv = std::sqrt(den[xi(i, kV)]), sl = std::sqrt(den[xi(i, kL)]), ss = std::sqrt(sv * sl);
    const auto t = project_cone_box(sv * target(kV), sl * target(kL), ss * std::complex<double>(target(kBP), target(kBQ)),
                                    sv * bus.v_min, sv * bus.v_max, sl * br.l_max);
    s.x[xi(i, kV)] = t.v / sv;
    s.x[xi(i, kL)] = t.l / sl;
    s.x[xi(i, kBP)] = t.S.real() / ss;
    s.x[xi(i, kBQ)] = t.S.imag() / ss;
  });
}

void admm_y_update(AdmmState& s, const PowerNetwork& pn, int threads, double relaxation) {
  s.y_prev = s.y;
  s.x_hat.resize(s.y.size());
  for (std::size_t c = 0; c < s.y.size(); ++c) s.x_hat[c] = relaxation * s.x[s.owner[c]] + (1.0 - relaxation) * s.y[c];
  parallel_for(pn.bus_count(), threads, [&](std::size_t i) {
    const std::size_t first = s.block[i], count = s.block[i + 1] - first;
    const bool slack = i == pn.slack_index();
    const int rows = slack ? 2 : 3;
    Eigen::VectorXd u(count), dinv(count);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t c = first + k;
      const double w = s.rho * s.weight[c];
      u[k] = s.x_hat[c] + s.lambda[c] / w;
      dinv[k] = 1.0 / w;
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, count);
    A(0, 0) = 1.0;  // p
    A(1, 1) = 1.0;  // q
    std::size_t k = 3;
    if (!slack) {
      const auto z = pn.branches()[pn.branch_of(i)].z;
      A(0, 4) = -1.0;
      A(1, 5) = -1.0;
      A(2, 6) = 1.0;  // ancestor voltage
      A(2, 2) = -1.0;
      A(2, 4) = 2.0 * z.real();
      A(2, 5) = 2.0 * z.imag();
      A(2, 3) = -std::norm(z);
      k = 7;
    }
    for (std::size_t j : pn.children(i)) {
      const auto z = pn.branches()[pn.branch_of(j)].z;
      A(0, k) = -z.real();
      A(1, k) = -z.imag();
      A(0, k + 1) = 1.0;
      A(1, k + 2) = 1.0;
      k += 3;
    }
    const Eigen::MatrixXd ADi = A * dinv.asDiagonal();
    const Eigen::MatrixXd K = ADi * A.transpose();
    const Eigen::VectorXd eta = K.ldlt().solve(A * u);
    const Eigen::VectorXd y = u - ADi.transpose() * eta;
    for (std::size_t m = 0; m < count; ++m) s.y[first + m] = y[m];
  });
}

void admm_dual_update(AdmmState& s) {
  double primal = 0.0;
  std::vector<double> move(s.x.size(), 0.0);
  for (std::size_t c = 0; c < s.y.size(); ++c) {
    const double r = s.x[s.owner[c]] - s.y[c];
    s.lambda[c] += s.rho * s.weight[c] * (s.x_hat.empty() ? r : s.x_hat[c] - s.y[c]);
    primal += r * r;
    move[s.owner[c]] += s.rho * s.weight[c] * (s.y[c] - s.y_prev[c]);
  }
  double dual = 0.0;
  for (double m : move) dual += m * m;
  s.primal = std::sqrt(primal);
  s.dual = std::sqrt(dual);
}

BranchFlowState admm_state(const AdmmState& s, std::size_t bus_count) {
  BranchFlowState st;
  for (auto* vec : {&st.v, &st.l, &st.P, &st.Q, &st.p, &st.q}) vec->resize(bus_count);
  for (std::size_t i = 0; i < bus_count; ++i) {
    st.p[i] = s.x[xi(i, kP)];
    st.q[i] = s.x[xi(i, kQ)];
    st.v[i] = s.x[xi(i, kV)];
    st.l[i] = s.x[xi(i, kL)];
    st.P[i] = s.x[xi(i, kBP)];
    st.Q[i] = s.x[xi(i, kBQ)];
  }
  return st;
}

OpfSolution solve_opf(const PowerNetwork& pn, const std::vector<GenerationCap>& caps, const OpfOptions& opt) {
  if (!(opt.rho > 0.0) || !(opt.eps > 0.0) || opt.max_iter < 1)
    fail(ErrorKind::InvalidArgument, "OPF options need rho > 0, eps > 0 and max_iter >= 1");
  if (opt.alpha1 < 0.0) fail(ErrorKind::InvalidArgument, "alpha1 must be nonnegative");
  const auto& slack = pn.buses()[pn.slack_index()];
  if (pn.slack_v() < slack.v_min - 1e-12 || pn.slack_v() > slack.v_max + 1e-12)
    fail(ErrorKind::Infeasible, "slack voltage outside the slack bus bounds");
  generation_boxes(pn, caps);

  AdmmState s = admm_init(pn, opt.rho, opt.scale);
  OpfSolution sol;
  // Anderson acceleration of the fixed-point map (y, lambda) -> (y+, lambda+)
  // in the metric sum rho w y^2 + lambda^2 / (rho w).
  const std::size_t m = s.y.size();
  auto pack = [&](const std::vector<double>& y, const std::vector<double>& lam) {
    Eigen::VectorXd z(2 * m);
    for (std::size_t c = 0; c < m; ++c) {
      const double w = std::sqrt(s.rho * s.weight[c]);
      z[c] = w * y[c];
      z[m + c] = lam[c] / w;
    }
    return z;
  };
  auto unpack = [&](const Eigen::VectorXd& z) {
    for (std::size_t c = 0; c < m; ++c) {
      const double w = std::sqrt(s.rho * s.weight[c]);
      s.y[c] = z[c] / w;
      s.lambda[c] = z[m + c] * w;
    }
  };
  std::vector<Eigen::VectorXd> dF, dG;
  Eigen::VectorXd f_prev, g_prev;
  double f_best = kInf;
  for (int k = 1; k <= opt.max_iter; ++k) {
    const Eigen::VectorXd z_in = opt.memory > 0 ? pack(s.y, s.lambda) : Eigen::VectorXd();
    admm_x_update(s, pn, caps, opt);
    admm_y_update(s, pn, opt.threads, opt.relaxation);
    admm_dual_update(s);
    s.iteration = k;
    if (!std::isfinite(s.primal) || !std::isfinite(s.dual))
      fail(ErrorKind::Divergence, "ADMM divergence at iteration " + std::to_string(k));
    if (opt.trace) opt.trace(k, s.primal, s.dual, opf_objective(pn, admm_state(s, pn.bus_count()), opt.alpha1,
                                                                  opt.beta1, caps));
    if (std::max(s.primal, s.dual) <= opt.eps) {
      sol.converged = true;
      break;
    }
    bool rho_changed = false;
    if (opt.balance_rho && k % opt.balance_period == 0) {
      // Residuals relative to the size of the iterates and of the duals.
      double xs = 0.0, ys = 0.0;
      std::vector<double> agg(s.x.size(), 0.0);
      for (std::size_t c = 0; c < s.y.size(); ++c) {
        xs += s.x[s.owner[c]] * s.x[s.owner[c]];
        ys += s.y[c] * s.y[c];
        agg[s.owner[c]] += s.lambda[c];
      }
      double ls = 0.0;
      for (double a : agg) ls += a * a;
      const double rp = s.primal / std::max(std::sqrt(std::max(xs, ys)), 1e-12);
      const double rd = s.dual / std::max(std::sqrt(ls), 1e-12);
      if (rp > 10.0 * rd) s.rho *= 2.0, rho_changed = true;
      else if (rd > 10.0 * rp) s.rho /= 2.0, rho_changed = true;
    }
    if (opt.memory <= 0) continue;
    if (rho_changed) {
      dF.clear();
      dG.clear();
      f_prev.resize(0);
      f_best = kInf;
      continue;
    }
    const Eigen::VectorXd g = pack(s.y, s.lambda);
    const Eigen::VectorXd f = g - z_in;
    const double fn = f.norm();
    if (fn > opt.safeguard * f_best) {
      // Extrapolation overshot: drop the history and keep the plain step.
      dF.clear();
      dG.clear();
      f_prev.resize(0);
      f_best = fn;
      continue;
    }
    f_best = std::min(f_best, fn);
    if (f_prev.size() == f.size()) {
      dF.push_back(f - f_prev);
      dG.push_back(g - g_prev);
      if (static_cast<int>(dF.size()) > opt.memory) {
        dF.erase(dF.begin());
        dG.erase(dG.begin());
      }
    }
    f_prev = f;
    g_prev = g;
    if (dF.empty()) continue;
    Eigen::MatrixXd F(f.size(), dF.size()), G(f.size(), dG.size());
    for (std::size_t j = 0; j < dF.size(); ++j) F.col(j) = dF[j], G.col(j) = dG[j];
    const Eigen::VectorXd gamma = F.colPivHouseholderQr().solve(f);
    unpack(g - G * gamma);
  }
  sol.state = admm_state(s, pn.bus_count());
  sol.objective = opf_objective(pn, sol.state, opt.alpha1, opt.beta1, caps);
  sol.gap = exactness_gap(pn, sol.state);
  sol.iterations = s.iteration;
  sol.primal = s.primal;
  sol.dual = s.dual;
  sol.rho = s.rho;
  for (const auto& c : caps) {
    const std::size_t i = pn.bus_index(c.bus);
    sol.injections.push_back(sol.state.p[i] + pn.buses()[i].load.real());
  }
  return sol;
}

PowerNetwork scale_loads(const PowerNetwork& pn, double factor) {
  PowerNetwork out = pn;
  for (auto& b : out.mutable_buses()) b.load *= factor;
  return out;
}

}  // namespace ptc::powerflow
