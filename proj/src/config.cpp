#include "ptcosim/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ptcosim/error.hpp"
#include "text.hpp"

namespace ptc {
namespace {

std::string fmt_double(double v) {
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), p);
}

double parse_double(std::string_view key, std::string_view value) {
  auto v = text::to_double(value);
  if (!v) fail(ErrorKind::Parse, "key '" + std::string(key) + "': not a number: '" + std::string(value) + "'");
  return *v;
}

long long parse_int(std::string_view key, std::string_view value) {
  auto v = text::to_int(value);
  if (!v) fail(ErrorKind::Parse, "key '" + std::string(key) + "': not an integer: '" + std::string(value) + "'");
  return *v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  auto v = text::trim(value);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail(ErrorKind::Parse, "key '" + std::string(key) + "': not a boolean: '" + std::string(value) + "'");
}

std::vector<double> parse_list(std::string_view key, std::string_view value) {
  std::string normalized(value);
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::vector<double> out;
  for (auto tok : text::split_ws(normalized)) out.push_back(parse_double(key, tok));
  return out;
}

std::string join_list(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += fmt_double(xs[i]);
  }
  return out;
}

struct Field {
  std::function<void(ScenarioConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

template <typename M>
Field number_field(M ScenarioConfig::*member) {
  return {[member](ScenarioConfig& c, std::string_view k, std::string_view v) {
            if constexpr (std::is_same_v<M, double>) {
              c.*member = parse_double(k, v);
            } else {
              auto n = parse_int(k, v);
              if (n < 0 && std::is_unsigned_v<M>) fail(ErrorKind::Parse, "key '" + std::string(k) + "': negative value");
              c.*member = static_cast<M>(n);
            }
          },
          [member](const ScenarioConfig& c) {
            if constexpr (std::is_same_v<M, double>) return fmt_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

Field quad_field(Quadratic ScenarioConfig::*member, double Quadratic::*coef) {
  return {[member, coef](ScenarioConfig& c, std::string_view k, std::string_view v) { (c.*member).*coef = parse_double(k, v); },
          [member, coef](const ScenarioConfig& c) { return fmt_double((c.*member).*coef); }};
}

Field bool_field(bool ScenarioConfig::*member) {
  return {[member](ScenarioConfig& c, std::string_view k, std::string_view v) { c.*member = parse_bool(k, v); },
          [member](const ScenarioConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field string_field(std::string ScenarioConfig::*member) {
  return {[member](ScenarioConfig& c, std::string_view, std::string_view v) { c.*member = std::string(text::trim(v)); },
          [member](const ScenarioConfig& c) { return c.*member; }};
}

Field list_field(std::vector<double> ScenarioConfig::*member) {
  return {[member](ScenarioConfig& c, std::string_view k, std::string_view v) { c.*member = parse_list(k, v); },
          [member](const ScenarioConfig& c) { return join_list(c.*member); }};
}

const std::map<std::string, Field, std::less<>>& field_table() {
  static const std::map<std::string, Field, std::less<>> table = [] {
    std::map<std::string, Field, std::less<>> t;
    using C = ScenarioConfig;
    t["interval_minutes"] = number_field(&C::interval_minutes);
    t["horizon"] = number_field(&C::horizon);
    t["start_interval"] = number_field(&C::start_interval);
    t["sub_interval_minutes"] = number_field(&C::sub_interval_minutes);
    t["price_energy"] = number_field(&C::price_energy);
    t["congestion_fee"] = number_field(&C::congestion_fee);
    t["park_ratio_high"] = number_field(&C::park_ratio_high);
    t["park_ratio_mid"] = number_field(&C::park_ratio_mid);
    t["cds_capacity"] = number_field(&C::cds_capacity);
    t["avg_rate"] = number_field(&C::avg_rate);
    for (auto [name, member] : {std::pair{"f_ps", &C::f_ps}, std::pair{"f_uts", &C::f_uts}, std::pair{"f_wt", &C::f_wt}}) {
      t[std::string(name) + "_a"] = quad_field(member, &Quadratic::a);
      t[std::string(name) + "_b"] = quad_field(member, &Quadratic::b);
      t[std::string(name) + "_c"] = quad_field(member, &Quadratic::c);
    }
    t["gamma1"] = number_field(&C::gamma1);
    t["gamma1_max"] = number_field(&C::gamma1_max);
    t["tau1_hours"] = number_field(&C::tau1_hours);
    t["gamma2"] = number_field(&C::gamma2);
    t["price_min"] = number_field(&C::price_min);
    t["price_max"] = number_field(&C::price_max);
    t["cds_p_min"] = number_field(&C::cds_p_min);
    t["cds_p_max"] = number_field(&C::cds_p_max);
    t["alpha1"] = number_field(&C::alpha1);
    t["beta1"] = number_field(&C::beta1);
    t["rho"] = number_field(&C::rho);
    t["eps_traffic"] = number_field(&C::eps_traffic);
    t["eps_admm"] = number_field(&C::eps_admm);
    t["eps_eq"] = number_field(&C::eps_eq);
    t["golden_tol"] = number_field(&C::golden_tol);
    t["max_iter_traffic"] = number_field(&C::max_iter_traffic);
    t["max_iter_admm"] = number_field(&C::max_iter_admm);
    t["max_iter_eq"] = number_field(&C::max_iter_eq);
    t["soc_min"] = number_field(&C::soc_min);
    t["soc_max"] = number_field(&C::soc_max);
    t["tau2_minutes"] = number_field(&C::tau2_minutes);
    t["ev_rate_min"] = number_field(&C::ev_rate_min);
    t["ev_rate_max"] = number_field(&C::ev_rate_max);
    t["ev_battery_mwh"] = number_field(&C::ev_battery_mwh);
    t["ev_soc0_min"] = number_field(&C::ev_soc0_min);
    t["ev_soc0_max"] = number_field(&C::ev_soc0_max);
    t["base_mva"] = number_field(&C::base_mva);
    t["base_kv"] = number_field(&C::base_kv);
    t["capacity_scale"] = number_field(&C::capacity_scale);
    t["coordination"] = bool_field(&C::coordination);
    t["strict"] = bool_field(&C::strict);
    t["trace"] = bool_field(&C::trace);
    t["threads"] = number_field(&C::threads);
    t["seed"] = number_field(&C::seed);
    t["traffic_net"] = string_field(&C::traffic_net);
    t["traffic_trips"] = string_field(&C::traffic_trips);
    t["feeder"] = string_field(&C::feeder);
    t["load_profile"] = list_field(&C::load_profile);
    t["demand_profile"] = list_field(&C::demand_profile);
    // `site` is repeatable: each assignment appends one coupling record.
    t["site"] = Field{[](C& c, std::string_view k, std::string_view v) {
                        auto toks = text::split_ws(v);
                        if (toks.size() != 3)
                          fail(ErrorKind::Parse, "key 'site': expected '<cds_id> <pds_bus> <uts_node>'");
                        c.sites.push_back({static_cast<int>(parse_int(k, toks[0])), static_cast<int>(parse_int(k, toks[1])),
                                           static_cast<int>(parse_int(k, toks[2]))});
                      },
                      [](const C& c) {
                        std::string out;
                        for (const auto& s : c.sites) {
                          if (!out.empty()) out += "; ";
                          out += std::to_string(s.cds_id) + " " + std::to_string(s.pds_bus) + " " + std::to_string(s.uts_node);
                        }
                        return out;
                      }};
    return t;
  }();
  return table;
}

}  // namespace

void ScenarioConfig::set(std::string_view key, std::string_view value) {
  const auto& t = field_table();
  auto it = t.find(text::trim(key));
  if (it == t.end()) fail(ErrorKind::InvalidArgument, "unknown configuration key '" + std::string(key) + "'");
  it->second.set(*this, it->first, value);
}

std::string ScenarioConfig::get(std::string_view key) const {
  const auto& t = field_table();
  auto it = t.find(text::trim(key));
  if (it == t.end()) fail(ErrorKind::InvalidArgument, "unknown configuration key '" + std::string(key) + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& ScenarioConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, _] : field_table()) out.push_back(k);
    return out;
  }();
  return names;
}

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::Validation, std::string("invalid configuration: ") + what);
  };
  require(interval_minutes > 0, "interval_minutes must be > 0");
  require(sub_interval_minutes > 0 && sub_interval_minutes <= interval_minutes,
          "sub_interval_minutes must be in (0, interval_minutes]");
  require(horizon >= 1, "horizon must be >= 1");
  require(start_interval >= 0, "start_interval must be >= 0");
  require(eps_traffic > 0 && eps_admm > 0 && eps_eq > 0 && golden_tol > 0, "all tolerances must be > 0");
  require(max_iter_traffic > 0 && max_iter_admm > 0 && max_iter_eq > 0, "iteration caps must be > 0");
  require(gamma1 >= 0 && gamma1 <= gamma1_max, "0 <= gamma1 <= gamma1_max");
  require(park_ratio_high >= 0 && park_ratio_high <= 1 && park_ratio_mid >= 0 && park_ratio_mid <= 1,
          "parking ratios must lie in [0, 1]");
  require(park_ratio_mid <= park_ratio_high, "park_ratio_mid <= park_ratio_high");
  require(soc_min < soc_max, "soc_min < soc_max");
  require(soc_min >= 0 && soc_max <= 1, "SOC bounds must lie in [0, 1]");
  require(ev_soc0_min <= ev_soc0_max, "ev_soc0_min <= ev_soc0_max");
  require(avg_rate > 0, "avg_rate must be > 0");
  require(cds_capacity >= 0, "cds_capacity must be >= 0");
  require(f_ps.a >= 0 && f_uts.a >= 0 && f_wt.a >= 0, "cost quadratics must be convex (a >= 0)");
  require(gamma2 > 0, "gamma2 must be > 0");
  require(rho > 0, "rho must be > 0");
  require(tau1_hours >= 0 && tau2_minutes >= 0, "durations must be >= 0");
  require(price_min <= price_max, "price_min <= price_max");
  require(cds_p_min <= cds_p_max, "cds_p_min <= cds_p_max");
  require(ev_rate_min <= ev_rate_max, "ev_rate_min <= ev_rate_max");
  require(ev_battery_mwh > 0, "ev_battery_mwh must be > 0");
  require(base_mva > 0, "base_mva must be > 0");
  require(capacity_scale > 0, "capacity_scale must be > 0");
  require(threads >= 1, "threads must be >= 1");
  require(alpha1 >= 0, "alpha1 must be >= 0");
}

std::filesystem::path ScenarioConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

int ScenarioConfig::sub_intervals_per_interval() const {
  return std::max(1, static_cast<int>(interval_minutes / sub_interval_minutes + 0.5));
}

ScenarioConfig parse_config(std::string_view doc, const std::filesystem::path& base_dir) {
  ScenarioConfig cfg;
  cfg.base_dir = base_dir;
  int lineno = 0;
  for (auto raw : text::lines(doc)) {
    ++lineno;
    auto line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": expected 'key = value'");
    try {
      cfg.set(text::trim(line.substr(0, eq)), text::trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.kind(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open configuration '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string to_text(const ScenarioConfig& cfg) {
  std::string out;
  for (const auto& key : ScenarioConfig::keys()) {
    if (key == "site") continue;
    out += key + " = " + cfg.get(key) + "\n";
  }
  for (const auto& s : cfg.sites)
    out += "site = " + std::to_string(s.cds_id) + " " + std::to_string(s.pds_bus) + " " + std::to_string(s.uts_node) + "\n";
  return out;
}

}  // namespace ptc
