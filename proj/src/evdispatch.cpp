#include "ptcosim/evdispatch.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "ptcosim/error.hpp"

namespace ptc::evdispatch {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Prefix-sum corridor implied by the SOC bounds: S_t = sum of the first t rates.
std::pair<double, double> prefix_corridor(const Ev& ev, const ScheduleLimits& lim) {
  const double scale = ev.capacity / lim.dt;
  return {(ev.soc0 - lim.soc_hi) * scale, (ev.soc0 - lim.soc_lo) * scale};
}

// Projection onto {lo <= x <= hi, sum x = q} by a bisection on the shift,
// finished with an exact solve on the free coordinates.
std::vector<double> project_box_sum(const std::vector<double>& z, double lo, double hi, double q) {
  const std::size_t n = z.size();
  auto shifted_sum = [&](double lam) {
    double s = 0.0;
    for (double v : z) s += std::clamp(v - lam, lo, hi);
    return s;
  };
  double a = *std::min_element(z.begin(), z.end()) - hi;
  double b = *std::max_element(z.begin(), z.end()) - lo;
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    const double mid = 0.5 * (a + b);
    (shifted_sum(mid) > q ? a : b) = mid;
  }
  double lam = 0.5 * (a + b);
  // Solve exactly on the free set at lam and keep it if the classification holds.
  double fixed = 0.0, free_sum = 0.0;
  std::size_t free_count = 0;
  for (double v : z) {
    if (v - lam <= lo) fixed += lo;
    else if (v - lam >= hi) fixed += hi;
    else {
      free_sum += v;
      ++free_count;
    }
  }
  if (free_count > 0) {
    const double exact = (free_sum + fixed - q) / static_cast<double>(free_count);
    bool consistent = true;
    for (double v : z) {
      const bool was_free = v - lam > lo && v - lam < hi;
      const bool is_free = v - exact > lo && v - exact < hi;
      if (was_free && !is_free && std::abs(v - exact - std::clamp(v - exact, lo, hi)) > 1e-12) consistent = false;
    }
    if (consistent) lam = exact;
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(z[i] - lam, lo, hi);
  return x;
}

struct Constraint {
  Eigen::VectorXd normal;
  double bound = 0.0;  // normal . x >= bound
};

// Dual active-set projection (Goldfarb-Idnani with identity Hessian):
// minimise |x - z|^2 subject to sum x = q and the inequalities.
Eigen::VectorXd dual_active_set(const Eigen::VectorXd& z, double q, const std::vector<Constraint>& cons) {
  const Eigen::Index n = z.size();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd x = z + ones * ((q - z.sum()) / static_cast<double>(n));
  std::vector<int> active = {-1};  // -1 marks the equality
  std::vector<double> mult = {0.0};
  auto normal_of = [&](int j) -> const Eigen::VectorXd& { return j < 0 ? ones : cons[static_cast<std::size_t>(j)].normal; };

  const int max_steps = 50 * static_cast<int>(cons.size() + 1);
  for (int outer = 0; outer < max_steps; ++outer) {
    int p = -2;
    double worst = 0.0;
    for (std::size_t j = 0; j < cons.size(); ++j) {
      if (std::find(active.begin(), active.end(), static_cast<int>(j)) != active.end()) continue;
      const double s = cons[j].normal.dot(x) - cons[j].bound;
      const double tol = 1e-13 * (1.0 + std::abs(cons[j].bound));
      if (s < -tol && s < worst) {
        worst = s;
        p = static_cast<int>(j);
      }
    }
    if (p == -2) return x;
    const Eigen::VectorXd& np = normal_of(p);
    double up = 0.0;
    for (int inner = 0; inner < max_steps; ++inner) {
      const Eigen::Index k = static_cast<Eigen::Index>(active.size());
      Eigen::MatrixXd N(n, k);
      for (Eigen::Index c = 0; c < k; ++c) N.col(c) = normal_of(active[static_cast<std::size_t>(c)]);
      const Eigen::VectorXd r = (N.transpose() * N).ldlt().solve(N.transpose() * np);
      const Eigen::VectorXd dir = np - N * r;

      double t1 = kInf;
      std::size_t drop = 0;
      for (std::size_t c = 1; c < active.size(); ++c) {
        if (r(static_cast<Eigen::Index>(c)) > 1e-12) {
          const double t = mult[c] / r(static_cast<Eigen::Index>(c));
          if (t < t1) {
            t1 = t;
            drop = c;
          }
        }
      }
      const double curvature = dir.dot(np);
      const double slack = np.dot(x) - cons[static_cast<std::size_t>(p)].bound;
      const double t2 = curvature > 1e-12 * np.squaredNorm() ? -slack / curvature : kInf;
      if (!std::isfinite(t1) && !std::isfinite(t2)) fail(ErrorKind::Infeasible, "projection constraints are inconsistent");
      const double t = std::min(t1, t2);
      if (std::isfinite(t2)) x += t * dir;
      for (std::size_t c = 0; c < active.size(); ++c) mult[c] -= t * r(static_cast<Eigen::Index>(c));
      up += t;
      if (t2 <= t1) {
        active.push_back(p);
        mult.push_back(up);
        break;
      }
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
      mult.erase(mult.begin() + static_cast<std::ptrdiff_t>(drop));
    }
  }
  fail(ErrorKind::Divergence, "projection active-set loop did not terminate");
}

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void finalize(ChargingSchedule& s, const std::vector<double>& baseline, const std::vector<Ev>& evs,
              const ScheduleLimits& lim) {
  s.netload = netload_after(baseline, s.rates);
  s.objective = flatness_objective(s.netload);
  s.soc.clear();
  s.demand.clear();
  for (std::size_t i = 0; i < evs.size(); ++i) {
    s.soc.push_back(soc_trajectory(evs[i].soc0, evs[i].capacity, s.rates[i], lim.dt));
    s.demand.push_back(evs[i].demand);
  }
}

void check_inputs(const std::vector<double>& baseline, const std::vector<Ev>& evs, const ScheduleLimits& lim) {
  if (baseline.size() < 2) fail(ErrorKind::InvalidArgument, "smart schedule needs at least 2 sub-intervals");
  if (!(lim.rate_lo <= lim.rate_hi)) fail(ErrorKind::InvalidArgument, "empty rate interval");
  if (!(lim.dt > 0)) fail(ErrorKind::InvalidArgument, "sub-interval length must be > 0");
  for (std::size_t i = 0; i < evs.size(); ++i) {
    if (!(evs[i].capacity > 0)) fail(ErrorKind::InvalidArgument, "battery capacity must be > 0");
    auto range = achievable_demand(evs[i], lim, baseline.size());
    const double slack = 1e-12 * (1.0 + std::abs(evs[i].demand));
    if (!range.feasible || evs[i].demand < range.lo - slack || evs[i].demand > range.hi + slack) {
      std::ostringstream msg;
      msg << "infeasible demand for EV " << i << ": requested " << evs[i].demand;
      if (range.feasible) msg << ", achievable [" << range.lo << ", " << range.hi << "]";
      else msg << ", SOC corridor unreachable";
      fail(ErrorKind::Infeasible, msg.str());
    }
  }
}

}  // namespace

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::HighPrice: return "high-price";
    case Regime::MidPrice: return "mid-price";
    case Regime::NoPark: return "no-park";
  }
  return "unknown";
}

ParkingParams ParkingParams::from_config(const ScenarioConfig& cfg) {
  ParkingParams p;
  p.price_energy = cfg.price_energy;
  p.congestion_fee = cfg.congestion_fee;
  p.ratio_high = cfg.park_ratio_high;
  p.ratio_mid = cfg.park_ratio_mid;
  p.avg_rate = cfg.avg_rate;
  p.capacity = cfg.cds_capacity;
  return p;
}

ParkingDecision parked_evs(double price, double injection_mw, double inflow, const ParkingParams& p, int cds_id) {
  if (!(p.avg_rate > 0)) fail(ErrorKind::InvalidArgument, "average rate must be > 0");
  ParkingDecision d;
  d.cds_id = cds_id;
  d.price = price;
  d.injection = injection_mw;
  d.inflow = inflow;
  double ratio = 0.0;
  if (price >= p.price_energy + p.congestion_fee) {
    d.regime = Regime::HighPrice;
    ratio = p.ratio_high;
  } else if (price >= p.price_energy) {
    d.regime = Regime::MidPrice;
    ratio = p.ratio_mid;
  }
  const double wanted = ratio * std::min(std::abs(injection_mw) / p.avg_rate, std::max(0.0, inflow));
  d.parked = std::floor(std::min(wanted, p.capacity) + 1e-9);
  return d;
}

double flatness_objective(const std::vector<double>& netload) {
  double sum = 0.0;
  for (std::size_t t = 1; t < netload.size(); ++t) {
    const double d = netload[t] - netload[t - 1];
    sum += d * d;
  }
  return sum;
}

std::vector<double> netload_after(const std::vector<double>& baseline, const std::vector<std::vector<double>>& rates) {
  std::vector<double> out(baseline);
  for (std::size_t t = 0; t < out.size(); ++t) {
    double total = 0.0;
    for (const auto& ev : rates) total += ev[t];
    out[t] = baseline[t] - total;
  }
  return out;
}

std::vector<double> soc_trajectory(double soc0, double capacity, const std::vector<double>& rates, double dt) {
  if (!(capacity > 0)) fail(ErrorKind::InvalidArgument, "battery capacity must be > 0");
  std::vector<double> soc(rates.size() + 1);
  soc[0] = soc0;
  for (std::size_t t = 0; t < rates.size(); ++t) soc[t + 1] = soc[t] - rates[t] * dt / capacity;
  return soc;
}

DemandRange achievable_demand(const Ev& ev, const ScheduleLimits& lim, std::size_t periods) {
  auto [lower, upper] = prefix_corridor(ev, lim);
  DemandRange r;
  if (lower > 0 || upper < 0) return r;
  double a = 0.0, b = 0.0;
  for (std::size_t t = 0; t < periods; ++t) {
    a = std::max(lower, a + lim.rate_lo);
    b = std::min(upper, b + lim.rate_hi);
    if (a > b) return r;
  }
  r.lo = a;
  r.hi = b;
  r.feasible = true;
  return r;
}

std::vector<double> project_rates(const std::vector<double>& z, const Ev& ev, const ScheduleLimits& lim) {
  const std::size_t n = z.size();
  auto x = project_box_sum(z, lim.rate_lo, lim.rate_hi, ev.demand);
  auto [lower, upper] = prefix_corridor(ev, lim);
  const double tol = 1e-12 * (1.0 + std::abs(lower) + std::abs(upper));
  bool inside = true;
  double prefix = 0.0;
  for (std::size_t t = 0; t + 1 < n && inside; ++t) {
    prefix += x[t];
    inside = prefix >= lower - tol && prefix <= upper + tol;
  }
  if (inside) return x;

  std::vector<Constraint> cons;
  cons.reserve(4 * n);
  for (std::size_t t = 0; t < n; ++t) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    e(static_cast<Eigen::Index>(t)) = 1.0;
    cons.push_back({e, lim.rate_lo});
    cons.push_back({-e, -lim.rate_hi});
  }
  for (std::size_t t = 0; t + 1 < n; ++t) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    s.head(static_cast<Eigen::Index>(t + 1)).setOnes();
    cons.push_back({s, lower});
    cons.push_back({-s, -upper});
  }
  Eigen::VectorXd zz = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd sol = dual_active_set(zz, ev.demand, cons);
  return std::vector<double>(sol.data(), sol.data() + n);
}

ChargingSchedule solve_smart_schedule(const std::vector<double>& baseline, const std::vector<Ev>& evs,
                                      const ScheduleLimits& lim, const SolverOptions& opt) {
  check_inputs(baseline, evs, lim);
  const std::size_t T = baseline.size();
  const std::size_t m = evs.size();
  ChargingSchedule s;
  s.rates.assign(m, std::vector<double>(T, 0.0));
  if (m == 0) {
    finalize(s, baseline, evs, lim);
    return s;
  }
  // Start from the projection of the uniform split.
  for (std::size_t i = 0; i < m; ++i)
    s.rates[i] = project_rates(std::vector<double>(T, evs[i].demand / static_cast<double>(T)), evs[i], lim);

  // Gradient in each rate is -(2 D'D P)_t for every EV; the Hessian norm is at most 8 m.
  const double step = 1.0 / (8.0 * static_cast<double>(m));
  // Shared by every EV since the objective depends on the rates only through P.
  auto rate_gradient = [&](const std::vector<std::vector<double>>& r) {
    auto p = netload_after(baseline, r);
    std::vector<double> g(T, 0.0);
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const double d = p[t + 1] - p[t];
      g[t + 1] -= 2.0 * d;
      g[t] += 2.0 * d;
    }
    return g;
  };

  auto x = s.rates;
  auto y = x;
  double momentum = 1.0;
  auto px = netload_after(baseline, x);
  double fx = flatness_objective(px);
  double scale = 1.0;
  for (double v : baseline) scale = std::max(scale, std::abs(v));
  s.converged = false;
  std::vector<double> z(T);
  // Rates are not unique at the optimum (EVs can trade energy), the netload is;
  // convergence is therefore judged on the netload.
  for (int k = 1; k <= opt.max_iter; ++k) {
    const auto g = rate_gradient(y);
    std::vector<std::vector<double>> next(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t t = 0; t < T; ++t) z[t] = y[i][t] - step * g[t];
      next[i] = project_rates(z, evs[i], lim);
    }
    auto pn = netload_after(baseline, next);
    const double fn = flatness_objective(pn);
    s.iterations = k;
    if (fn > fx) {
      // Restart: drop momentum and retry from the last accepted iterate.
      momentum = 1.0;
      y = x;
      continue;
    }
    double move = 0.0;
    for (std::size_t t = 0; t < T; ++t) move = std::max(move, std::abs(pn[t] - px[t]));
    const double mom_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const double beta = (momentum - 1.0) / mom_next;
    momentum = mom_next;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t t = 0; t < T; ++t) y[i][t] = next[i][t] + beta * (next[i][t] - x[i][t]);
    x = std::move(next);
    px = std::move(pn);
    fx = fn;
    if (move <= opt.tol * scale) {
      s.converged = true;
      break;
    }
  }
  s.rates = std::move(x);
  finalize(s, baseline, evs, lim);
  return s;
}

ChargingSchedule stochastic_schedule(const std::vector<double>& baseline, const std::vector<Ev>& evs,
                                     const ScheduleLimits& lim, std::uint64_t seed) {
  check_inputs(baseline, evs, lim);
  std::uint64_t state = seed;
  ChargingSchedule s;
  for (const auto& ev : evs) {
    std::vector<double> draw(baseline.size());
    for (double& v : draw) {
      const double u = static_cast<double>(splitmix(state) >> 11) * 0x1.0p-53;
      v = lim.rate_lo + u * (lim.rate_hi - lim.rate_lo);
    }
    s.rates.push_back(project_rates(draw, ev, lim));
  }
  finalize(s, baseline, evs, lim);
  return s;
}

std::string schedule_csv(int cds_id, const ChargingSchedule& s, bool header) {
  std::ostringstream out;
  out.precision(17);
  if (header) out << "cds_id,ev_id,sub_interval,rate,soc\n";
  for (std::size_t i = 0; i < s.rates.size(); ++i)
    for (std::size_t t = 0; t < s.rates[i].size(); ++t)
      out << cds_id << "," << i << "," << t << "," << s.rates[i][t] << "," << s.soc[i][t + 1] << "\n";
  return out.str();
}

}  // namespace ptc::evdispatch
