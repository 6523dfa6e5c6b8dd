#pragma once

// Market price and building demand files, plus the synthetic generator.
//
//   lmp.csv     date,hour,price_mwh        (ISO date, hour 1..T, $/MWh)
//   demand.csv  building_id,date,hour,kwh
//
// Hours are 1-based in files and 0-based in memory; hour_index() is the only
// place that converts.

#include "dragg/core.hpp"
#include "dragg/sim.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dragg::io {

/// File hour (1..T) to vector index (0..T-1).
inline std::size_t hour_index(long hour, std::size_t T, const std::string& where) {
  if (hour < 1 || static_cast<std::size_t>(hour) > T) {
    throw DataError(where + ": hour " + std::to_string(hour) + " outside 1.." + std::to_string(T));
  }
  return static_cast<std::size_t>(hour - 1);
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw DataError(path + ": missing column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  CsvTable t;
  t.path = path;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    if (t.header.empty()) {
      t.header = split_csv(line);
      if (!t.header.empty() && t.header[0].rfind("\xEF\xBB\xBF", 0) == 0) t.header[0].erase(0, 3);
      continue;
    }
    t.rows.emplace_back(n, split_csv(line));
  }
  if (t.header.empty()) throw DataError(path + ": empty file");
  return t;
}

inline std::string row_ref(const CsvTable& t, std::size_t line) {
  return t.path + " row " + std::to_string(line);
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": malformed number '" + s + "'");
  }
}

inline long parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": malformed integer '" + s + "'");
  }
}

inline bool is_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{std::stoi(s.substr(0, 4))}, month{static_cast<unsigned>(std::stoi(s.substr(5, 2)))},
                           day{static_cast<unsigned>(std::stoi(s.substr(8, 2)))}};
  return ymd.ok();
}

inline std::string require_date(const std::string& s, const std::string& where) {
  if (!is_iso_date(s)) throw DataError(where + ": bad date '" + s + "' (expected YYYY-MM-DD)");
  return s;
}

/// Shortest %.17g-style text; deterministic across runs.
inline std::string num(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

/// Decimal text s with parse(s) / 1000 == v, so a $/kWh value survives a
/// trip through a $/MWh file unchanged.
inline std::string mwh_text(double v) {
  double y = v * 1000.0;
  for (int k = 0; k < 8 && y / 1000.0 != v; ++k) y = std::nextafter(y, y / 1000.0 < v ? INFINITY : -INFINITY);
  return num(y);
}

inline std::map<std::string, PriceVector> assemble_days(std::map<std::string, std::vector<std::optional<double>>>& raw,
                                                        const std::string& path) {
  std::map<std::string, PriceVector> out;
  for (auto& [date, hours] : raw) {
    Vector v(static_cast<Eigen::Index>(hours.size()));
    for (std::size_t t = 0; t < hours.size(); ++t) {
      if (!hours[t]) throw DataError(path + ": date " + date + " missing hour " + std::to_string(t + 1));
      v[static_cast<Eigen::Index>(t)] = *hours[t];
    }
    out.emplace(date, PriceVector(std::move(v)));
  }
  return out;
}

}  // namespace detail

//---------------------------------------------------------------------------//
// LMP
//---------------------------------------------------------------------------//

/// Reads `date,hour,price_mwh` into $/kWh day vectors.
inline std::map<std::string, PriceVector> load_lmp(const std::string& path, std::size_t T = kDefaultHorizon) {
  const auto tab = detail::read_csv(path);
  const auto cd = tab.column("date"), ch = tab.column("hour"), cp = tab.column("price_mwh");
  std::map<std::string, std::vector<std::optional<double>>> raw;
  for (const auto& [line, f] : tab.rows) {
    const std::string where = detail::row_ref(tab, line);
    if (f.size() != tab.header.size()) throw DataError(where + ": expected " + std::to_string(tab.header.size()) + " fields");
    const std::string date = detail::require_date(f[cd], where);
    const std::size_t t = hour_index(detail::parse_int(f[ch], where), T, where);
    const double price = detail::parse_double(f[cp], where);
    if (!(price > 0.0)) throw DataError(where + ": non-positive price " + f[cp]);
    auto& day = raw.try_emplace(date, T).first->second;
    if (day[t]) throw DataError(where + ": duplicate record for date " + date + " hour " + std::to_string(t + 1));
    day[t] = price / 1000.0;
  }
  if (raw.empty()) throw DataError(path + ": no price records");
  return detail::assemble_days(raw, path);
}

inline void save_lmp(const std::string& path, const std::map<std::string, PriceVector>& days) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "date,hour,price_mwh\n";
  for (const auto& [date, v] : days) {
    for (std::size_t t = 0; t < v.size(); ++t) out << date << ',' << t + 1 << ',' << detail::mwh_text(v[t]) << '\n';
  }
}

/// CAISO OASIS day-ahead LMP export. Mapping onto the plain format:
///   OPR_DT -> date, OPR_HR -> hour, MW -> price_mwh (OASIS stores the
///   price in its MW column), keeping rows with LMP_TYPE == "LMP" and, when
///   `node` is given, NODE == node.
inline std::map<std::string, PriceVector> load_lmp_caiso(const std::string& path, const std::string& node = "",
                                                         std::size_t T = kDefaultHorizon) {
  const auto tab = detail::read_csv(path);
  const auto cd = tab.column("OPR_DT"), ch = tab.column("OPR_HR"), ct = tab.column("LMP_TYPE"),
             cp = tab.column("MW");
  std::optional<std::size_t> cn;
  if (!node.empty()) cn = tab.column("NODE");
  std::map<std::string, std::vector<std::optional<double>>> raw;
  for (const auto& [line, f] : tab.rows) {
    const std::string where = detail::row_ref(tab, line);
    if (f.size() != tab.header.size()) throw DataError(where + ": expected " + std::to_string(tab.header.size()) + " fields");
    if (f[ct] != "LMP") continue;
    if (cn && f[*cn] != node) continue;
    const std::string date = detail::require_date(f[cd], where);
    const std::size_t t = hour_index(detail::parse_int(f[ch], where), T, where);
    const double price = detail::parse_double(f[cp], where);
    if (!(price > 0.0)) throw DataError(where + ": non-positive price " + f[cp]);
    auto& day = raw.try_emplace(date, T).first->second;
    if (day[t]) throw DataError(where + ": duplicate record for date " + date + " hour " + std::to_string(t + 1));
    day[t] = price / 1000.0;
  }
  if (raw.empty()) throw DataError(path + ": no LMP rows");
  return detail::assemble_days(raw, path);
}

//---------------------------------------------------------------------------//
// Building demand
//---------------------------------------------------------------------------//

using DemandData = std::map<std::string, std::map<std::string, DemandVector>>;

struct DemandLoad {
  DemandData data;
  std::vector<std::string> warnings;
};

/// Reads `building_id,date,hour,kwh`. Building-days that are all zero are
/// dropped with a warning; a building left with no days disappears.
inline DemandLoad load_demand(const std::string& path, std::size_t T = kDefaultHorizon) {
  const auto tab = detail::read_csv(path);
  const auto cb = tab.column("building_id"), cd = tab.column("date"), ch = tab.column("hour"),
             ck = tab.column("kwh");
  std::map<std::string, std::map<std::string, std::vector<std::optional<double>>>> raw;
  for (const auto& [line, f] : tab.rows) {
    const std::string where = detail::row_ref(tab, line);
    if (f.size() != tab.header.size()) throw DataError(where + ": expected " + std::to_string(tab.header.size()) + " fields");
    if (f[cb].empty()) throw DataError(where + ": empty building_id");
    const std::string date = detail::require_date(f[cd], where);
    const std::size_t t = hour_index(detail::parse_int(f[ch], where), T, where);
    const double kwh = detail::parse_double(f[ck], where);
    if (kwh < 0.0) throw DataError(where + ": negative kwh " + f[ck]);
    auto& day = raw[f[cb]].try_emplace(date, T).first->second;
    if (day[t]) {
      throw DataError(where + ": duplicate record for building " + f[cb] + " date " + date + " hour " +
                      std::to_string(t + 1));
    }
    day[t] = kwh;
  }
  if (raw.empty()) throw DataError(path + ": no demand records");

  DemandLoad out;
  for (auto& [b, days] : raw) {
    for (auto& [date, hours] : days) {
      Vector v(static_cast<Eigen::Index>(T));
      for (std::size_t t = 0; t < T; ++t) {
        if (!hours[t]) {
          throw DataError(path + ": building " + b + " date " + date + " missing hour " + std::to_string(t + 1));
        }
        v[static_cast<Eigen::Index>(t)] = *hours[t];
      }
      if (!(v.maxCoeff() > 0.0)) {
        out.warnings.push_back("building " + b + " dropped on " + date + ": all-zero schedule");
        continue;
      }
      out.data[b].emplace(date, DemandVector(std::move(v)));
    }
  }
  return out;
}

inline void save_demand(const std::string& path, const DemandData& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "building_id,date,hour,kwh\n";
  for (const auto& [b, days] : data) {
    for (const auto& [date, v] : days) {
      for (std::size_t t = 0; t < v.size(); ++t) out << b << ',' << date << ',' << t + 1 << ',' << detail::num(v[t]) << '\n';
    }
  }
}

//---------------------------------------------------------------------------//
// Synthetic data
//---------------------------------------------------------------------------//

struct SynthShape {
  double base_mwh = 40.0;        // overnight price level
  double evening_peak_mwh = 30.0;
  double solar_dip_mwh = 18.0;
  double day_scale_spread = 0.15;
  double min_load_kwh = 5.0;
  double max_load_kwh = 50.0;
};

/// ISO date `offset` days after `start`.
inline std::string add_days(const std::string& start, int offset) {
  using namespace std::chrono;
  detail::require_date(start, "add_days");
  const year_month_day ymd{year{std::stoi(start.substr(0, 4))}, month{static_cast<unsigned>(std::stoi(start.substr(5, 2)))},
                           day{static_cast<unsigned>(std::stoi(start.substr(8, 2)))}};
  const year_month_day r{sys_days{ymd} + days{offset}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(r.year()), static_cast<unsigned>(r.month()),
                static_cast<unsigned>(r.day()));
  return buf;
}

/// Duck-curve prices (solar dip around midday, peak in hours 17-20) and
/// bimodal building loads (morning and evening peaks). Values are rounded to
/// file precision so that generated data equals its own files on reload.
inline Dataset synth_generate(std::uint64_t seed, std::size_t N, std::size_t T = kDefaultHorizon,
                              std::size_t days = 1, const std::string& start = "2022-05-01",
                              const SynthShape& shape = {}) {
  if (T == 0) throw DomainError("synth: T must be positive");
  auto gauss = [](double x, double mu, double s) { return std::exp(-0.5 * (x - mu) * (x - mu) / (s * s)); };
  auto tod = [T](std::size_t t) { return (static_cast<double>(t) + 0.5) * 24.0 / static_cast<double>(T); };
  Dataset data;
  std::mt19937_64 rng(derive_seed(seed, 11));
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (std::size_t k = 0; k < days; ++k) {
    const std::string date = add_days(start, static_cast<int>(k));
    const double scale = 1.0 + shape.day_scale_spread * uni(rng);
    Vector lam(static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
      const double h = tod(t);
      double mwh = shape.base_mwh + shape.evening_peak_mwh * gauss(h, 18.5, 1.4) -
                   shape.solar_dip_mwh * gauss(h, 13.0, 2.5) + 5.0 * gauss(h, 8.0, 1.2) + 1.5 * uni(rng);
      mwh = std::round(scale * mwh * 100.0) / 100.0;
      lam[static_cast<Eigen::Index>(t)] = mwh / 1000.0;
    }
    data.lmp.emplace(date, PriceVector(std::move(lam)));
  }
  std::uniform_real_distribution<double> load(shape.min_load_kwh, shape.max_load_kwh);
  std::uniform_real_distribution<double> amp(0.1, 0.6);
  for (std::size_t i = 0; i < N; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "B%03zu", i + 1);
    const double base = load(rng);
    const double morning = amp(rng), evening = amp(rng) + 0.2;
    for (std::size_t k = 0; k < days; ++k) {
      Vector x(static_cast<Eigen::Index>(T));
      for (std::size_t t = 0; t < T; ++t) {
        const double h = tod(t);
        const double shape_t = 0.5 + morning * gauss(h, 8.0, 1.8) + evening * gauss(h, 18.5, 2.2);
        x[static_cast<Eigen::Index>(t)] = std::round(base * shape_t * (1.0 + 0.05 * uni(rng)) * 1000.0) / 1000.0;
      }
      data.demand[id].emplace(add_days(start, static_cast<int>(k)), DemandVector(std::move(x)));
    }
  }
  return data;
}

/// Loads a Dataset from the two plain CSV files (or CAISO format for prices).
inline Dataset load_dataset(const std::string& lmp_path, const std::string& demand_path, std::size_t T,
                            bool caiso = false, const std::string& node = "",
                            std::vector<std::string>* warnings = nullptr) {
  Dataset d;
  d.lmp = caiso ? load_lmp_caiso(lmp_path, node, T) : load_lmp(lmp_path, T);
  auto dl = load_demand(demand_path, T);
  d.demand = std::move(dl.data);
  if (warnings) warnings->insert(warnings->end(), dl.warnings.begin(), dl.warnings.end());
  return d;
}

}  // namespace dragg::io
