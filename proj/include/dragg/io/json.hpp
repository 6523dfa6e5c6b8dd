#pragma once

// JSON forms of the result and configuration types. Infinite bounds are
// written as null. Keys keep insertion order so files diff cleanly.

#include "dragg/bounds.hpp"
#include "dragg/core.hpp"
#include "dragg/learning.hpp"
#include "dragg/sim.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>

namespace dragg::io {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json array(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

template <class Tag>
Json array(const Hourly<Tag>& v) {
  return array(v.values());
}

inline Json array(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

inline Json matrix(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(array(Vector(m.row(r).transpose())));
  return rows;
}

inline double read_number(const Json& j, const char* what) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) throw DataError(std::string("JSON field '") + what + "' must be a number");
  return j.get<double>();
}

inline Vector read_vector(const Json& j, const char* what) {
  if (!j.is_array()) throw DataError(std::string("JSON field '") + what + "' must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = read_number(j[i], what);
  return v;
}

inline const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("JSON is missing field '") + key + "'");
  return j.at(key);
}

}  // namespace detail

//---------------------------------------------------------------------------//
// Bounds
//---------------------------------------------------------------------------//

inline Json to_json(const BoundInputs& in) {
  auto prov = [&](const char* k) {
    auto it = in.provenance.find(k);
    return it == in.provenance.end() ? std::string("certified") : std::string(to_string(it->second));
  };
  Json j = Json::object();
  auto put = [&](const char* k, Json v) { j[k] = Json{{"value", std::move(v)}, {"provenance", prov(k)}}; };
  // Absent estimates are omitted; an infinite one is written as null.
  auto put_opt = [&](const char* k, const std::optional<double>& v) {
    if (v) put(k, detail::number(*v));
  };
  put("T", in.T);
  put("lambda_max", detail::number(in.lambda_max));
  put("p_max", detail::number(in.p_max));
  put("phi_max", detail::number(in.phi_max));
  put("L_phi", detail::number(in.L_phi));
  put("L_dphi", detail::number(in.L_dphi));
  put("theta_max", detail::number(in.theta_max));
  put_opt("theta_r_max", in.theta_r_max);
  put_opt("eps_m_max", in.eps_m_max);
  put_opt("delta", in.delta);
  put("m", detail::number(in.m));
  put("M", in.M);
  put("beta0", detail::number(in.beta0));
  put("beta1", detail::number(in.beta1));
  put("lambda_max_Pi0inv", detail::number(in.lambda_max_pi0_inv));
  put("d0_norm", detail::number(in.d0_norm));
  put("L_i_hat", detail::array(in.L_i_hat));
  put("L_pi", detail::array(in.L_pi));
  return j;
}

inline BoundInputs bound_inputs_from_json(const Json& j) {
  BoundInputs in;
  auto val = [&](const char* k) -> const Json& { return detail::field(detail::field(j, k), "value"); };
  auto opt = [&](const char* k) -> std::optional<double> {
    if (!j.contains(k)) return std::nullopt;
    return detail::read_number(val(k), k);
  };
  auto vec = [&](const char* k) {
    const Vector v = detail::read_vector(val(k), k);
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  in.T = val("T").get<std::size_t>();
  in.lambda_max = detail::read_number(val("lambda_max"), "lambda_max");
  in.p_max = detail::read_number(val("p_max"), "p_max");
  in.phi_max = detail::read_number(val("phi_max"), "phi_max");
  in.L_phi = detail::read_number(val("L_phi"), "L_phi");
  in.L_dphi = detail::read_number(val("L_dphi"), "L_dphi");
  in.theta_max = detail::read_number(val("theta_max"), "theta_max");
  in.theta_r_max = opt("theta_r_max");
  in.eps_m_max = opt("eps_m_max");
  in.delta = opt("delta");
  in.m = detail::read_number(val("m"), "m");
  in.M = val("M").get<std::size_t>();
  in.beta0 = detail::read_number(val("beta0"), "beta0");
  in.beta1 = detail::read_number(val("beta1"), "beta1");
  in.lambda_max_pi0_inv = detail::read_number(val("lambda_max_Pi0inv"), "lambda_max_Pi0inv");
  in.d0_norm = detail::read_number(val("d0_norm"), "d0_norm");
  in.L_i_hat = vec("L_i_hat");
  in.L_pi = vec("L_pi");
  for (const auto& [k, v] : j.items()) {
    const auto p = v.value("provenance", std::string("certified"));
    in.provenance[k] = p == "estimate" ? Provenance::estimate : Provenance::certified;
  }
  return in;
}

inline Json to_json(const BoundReport& r) {
  bool estimated = false;
  for (const auto& [_, p] : r.inputs.provenance) estimated = estimated || p == Provenance::estimate;
  Json j = Json::object();
  j["inputs"] = to_json(r.inputs);
  j["provenance"] = estimated ? "estimate" : "certified";
  j["eta"] = detail::number(r.eta);
  j["zeta"] = detail::number(r.zeta);
  j["zeta2"] = detail::number(r.zeta2);
  j["L_a"] = detail::number(r.L_a);
  j["L_h"] = detail::number(r.L_h);
  j["dist_bound"] = detail::number(r.dist_bound);
  j["eps_a"] = detail::number(r.eps_a);
  j["eps_p"] = detail::array(r.eps_p);
  j["g_a_interval"] = Json::array({detail::number(r.g_a_interval.lo), detail::number(r.g_a_interval.hi)});
  Json gp = Json::array();
  for (const auto& iv : r.g_p_intervals) gp.push_back(Json::array({detail::number(iv.lo), detail::number(iv.hi)}));
  j["g_p_intervals"] = gp;
  j["diagnostics"] = r.diagnostics;
  return j;
}

//---------------------------------------------------------------------------//
// Day results
//---------------------------------------------------------------------------//

inline Json to_json(const PEReport& pe) {
  return Json{{"window", pe.window},
              {"beta0", detail::number(pe.beta0)},
              {"beta1", detail::number(pe.beta1)},
              {"satisfied", pe.satisfied}};
}

inline Json to_json(const DayResult& r) {
  Json j = Json::object();
  j["date"] = r.date;
  j["basis"] = r.basis_kind;
  j["samples_used"] = r.samples_used;
  j["lambda"] = detail::array(r.lambda);
  j["p_max"] = detail::number(r.p_max);
  j["p_eps"] = detail::array(r.p_eps);
  j["d0"] = detail::array(r.d0);
  j["bid"] = Json{{"lambda", detail::array(r.lambda)}, {"delta_d", detail::array(r.bid_delta)}};
  j["true_delta_d"] = detail::array(r.true_delta);
  j["learned_demand"] = detail::array(r.learned_demand);
  j["g_a_surrogate"] = detail::number(r.g_a_surrogate);
  j["g_a_true"] = detail::number(r.g_a_true);
  j["g_a_gap"] = detail::number(r.g_a_surrogate - r.g_a_true);
  Json ps = Json::array();
  for (std::size_t i = 0; i < r.x_eps.size(); ++i) {
    ps.push_back(Json{{"id", r.prosumer_ids[i]}, {"g_p", detail::number(r.g_p[i])}, {"x_eps", detail::array(r.x_eps[i])}});
  }
  j["prosumers"] = ps;
  j["total_saved_kwh"] = detail::number(r.total_saved_kwh);
  j["co2_savings_lbs"] = detail::number(r.co2_savings_lbs);
  j["optimizer"] = Json{{"converged", r.optimizer_converged}, {"restart_values", detail::array(r.restart_values)}};
  j["pe"] = to_json(r.pe);
  j["theta"] = detail::matrix(r.theta);
  j["innovation_norms"] = detail::array(r.innovation_norms);
  j["warnings"] = r.warnings;
  j["bound_report"] = r.bound_report ? to_json(*r.bound_report) : Json(nullptr);
  return j;
}

/// Recomputes a BoundReport from the inputs stored in a day JSON.
inline BoundReport bound_report_from_day_json(const Json& day) {
  const Json& br = detail::field(day, "bound_report");
  if (br.is_null()) throw DataError("day JSON carries no bound inputs");
  const BoundInputs in = bound_inputs_from_json(detail::field(br, "inputs"));
  const double g_a = detail::read_number(detail::field(day, "g_a_surrogate"), "g_a_surrogate");
  std::vector<double> g_p;
  for (const auto& p : detail::field(day, "prosumers")) g_p.push_back(detail::read_number(detail::field(p, "g_p"), "g_p"));
  return compute_bound_report(in, g_a, g_p);
}

//---------------------------------------------------------------------------//
// Game configuration
//---------------------------------------------------------------------------//

inline Json to_json(const GameConfig& c) {
  Json ps = Json::array();
  for (const auto& p : c.prosumers) {
    ps.push_back(Json{{"id", p.id}, {"u", p.u}, {"a", p.a}, {"W", p.W}, {"schedule", detail::array(p.schedule)}});
  }
  return Json{{"date", c.day.date},
              {"lambda", detail::array(c.day.lambda)},
              {"p_max", c.day.p_max},
              {"sample_budget", c.sample_budget},
              {"forgetting", c.forgetting},
              {"rng_seed", c.rng_seed},
              {"prosumers", ps}};
}

inline GameConfig game_config_from_json(const Json& j) {
  GameConfig c;
  c.day.date = detail::field(j, "date").get<std::string>();
  c.day.lambda = PriceVector(detail::read_vector(detail::field(j, "lambda"), "lambda"));
  c.day.p_max = detail::read_number(detail::field(j, "p_max"), "p_max");
  c.sample_budget = detail::field(j, "sample_budget").get<std::size_t>();
  c.forgetting = detail::read_number(detail::field(j, "forgetting"), "forgetting");
  c.rng_seed = detail::field(j, "rng_seed").get<std::uint64_t>();
  for (const auto& p : detail::field(j, "prosumers")) {
    ProsumerProfile pr;
    pr.id = detail::field(p, "id").get<std::string>();
    pr.u = detail::read_number(detail::field(p, "u"), "u");
    pr.a = detail::read_number(detail::field(p, "a"), "a");
    pr.W = detail::read_number(detail::field(p, "W"), "W");
    pr.schedule = DemandVector(detail::read_vector(detail::field(p, "schedule"), "schedule"));
    c.prosumers.push_back(std::move(pr));
  }
  return c;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace dragg::io
