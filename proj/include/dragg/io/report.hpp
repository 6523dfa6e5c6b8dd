#pragma once

// Sweep summary CSV and static SVG charts. Output bytes depend only on the
// inputs: fixed number formats, no timestamps, no locale.

#include "dragg/io/data.hpp"
#include "dragg/sim.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace dragg::io {

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "date,kind,days,a,q_rule,J,N,seed,status,samples_used,g_a_surrogate,g_a_true,gap,g_p_mean,g_p_min,"
        "demand_final_kwh,saved_kwh,co2_lbs,p_eps_mean,restart_spread\n";
  using detail::num;
  for (const auto& r : rows) {
    std::string status = r.status;
    for (auto& ch : status) {
      if (ch == '"') ch = '\'';
    }
    os << r.date << ',' << (r.monthly_mean ? "month-mean" : "day") << ',' << r.days << ',' << num(r.a) << ','
       << r.q_rule << ',' << r.J << ',' << r.N << ',' << r.seed << ",\"" << status << "\"," << r.samples_used << ','
       << num(r.g_a_surrogate) << ',' << num(r.g_a_true) << ',' << num(r.gap) << ',' << num(r.g_p_mean) << ','
       << num(r.g_p_min) << ',' << num(r.demand_final) << ',' << num(r.saved_kwh) << ',' << num(r.co2_lbs) << ','
       << num(r.p_eps_mean) << ',' << num(r.restart_spread) << '\n';
  }
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_sweep_csv(out, rows);
}

//---------------------------------------------------------------------------//
// SVG
//---------------------------------------------------------------------------//

namespace svg {

inline std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v == 0.0 ? 0.0 : v);  // no "-0.00"
  return buf;
}

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v == 0.0 ? 0.0 : v);
  return buf;
}

struct Series {
  std::string name;
  std::string color;
  std::vector<double> y;
  bool dashed = false;
};

inline const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

/// One line panel with its own y-range, placed at (x0, y0) with size w x h.
inline void line_panel(std::ostringstream& o, double x0, double y0, double w, double h, const std::string& title,
                       const std::string& ylabel, const std::vector<Series>& series, double x_first = 1.0) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (const auto& s : series) {
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    n = std::max(n, s.y.size());
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto X = [&](std::size_t i) { return x0 + (n > 1 ? w * static_cast<double>(i) / static_cast<double>(n - 1) : 0.5 * w); };
  auto Y = [&](double v) { return y0 + h * (hi - v) / (hi - lo); };

  o << "<text x=\"" << f2(x0) << "\" y=\"" << f2(y0 - 8) << "\" font-size=\"13\">" << title << "</text>\n";
  o << "<rect x=\"" << f2(x0) << "\" y=\"" << f2(y0) << "\" width=\"" << f2(w) << "\" height=\"" << f2(h)
    << "\" fill=\"none\" stroke=\"#888\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    o << "<text x=\"" << f2(x0 - 6) << "\" y=\"" << f2(Y(v) + 4) << "\" font-size=\"10\" text-anchor=\"end\">"
      << label(v) << "</text>\n";
  }
  o << "<text x=\"" << f2(x0 - 52) << "\" y=\"" << f2(y0 + h / 2) << "\" font-size=\"11\" transform=\"rotate(-90 "
    << f2(x0 - 52) << ' ' << f2(y0 + h / 2) << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
  const std::size_t step = n > 12 ? (n + 11) / 12 : 1;
  for (std::size_t i = 0; i < n; i += step) {
    o << "<text x=\"" << f2(X(i)) << "\" y=\"" << f2(y0 + h + 14) << "\" font-size=\"10\" text-anchor=\"middle\">"
      << label(x_first + static_cast<double>(i)) << "</text>\n";
  }
  double lx = x0 + 8;
  for (const auto& s : series) {
    if (s.y.empty()) continue;
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
      << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      o << (first ? "" : " ") << f2(X(i)) << ',' << f2(Y(s.y[i]));
      first = false;
    }
    o << "\"/>\n";
    o << "<text x=\"" << f2(lx) << "\" y=\"" << f2(y0 + 14) << "\" font-size=\"11\" fill=\"" << s.color << "\">"
      << s.name << "</text>\n";
    lx += 14.0 + 7.0 * static_cast<double>(s.name.size());
  }
}

inline std::string document(double w, double h, const std::string& body) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f2(w) << "\" height=\"" << f2(h)
    << "\" viewBox=\"0 0 " << f2(w) << ' ' << f2(h) << "\" font-family=\"sans-serif\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" << body << "</svg>\n";
  return o.str();
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace svg

/// Prices on top (lambda, p_eps), demand below (d0, learned, final).
inline std::string prices_demand_svg(const DayResult& r) {
  std::ostringstream o;
  const Vector final_demand = r.d0.values() - r.true_delta.values();
  svg::line_panel(o, 80, 40, 600, 200, "Prices " + r.date, "$/kWh",
                  {{"lambda", svg::kPalette[0], svg::to_std(r.lambda.values())},
                   {"p_eps", svg::kPalette[1], svg::to_std(r.p_eps.values())}});
  svg::line_panel(o, 80, 300, 600, 200, "Demand " + r.date, "kWh",
                  {{"d0", svg::kPalette[2], svg::to_std(r.d0.values())},
                   {"learned", svg::kPalette[3], svg::to_std(r.learned_demand.values()), true},
                   {"final", svg::kPalette[4], svg::to_std(final_demand)}});
  return svg::document(720, 540, o.str());
}

/// Innovation norm per RLS step on a log10 scale.
inline std::string convergence_svg(const std::string& date, const std::vector<double>& innovation) {
  std::vector<double> y;
  y.reserve(innovation.size());
  for (double e : innovation) y.push_back(e > 0.0 ? std::log10(e) : -std::numeric_limits<double>::infinity());
  std::ostringstream o;
  svg::line_panel(o, 80, 40, 600, 260, "Learning innovation " + date, "log10 ||eps||", {{"eps", svg::kPalette[0], y}});
  return svg::document(720, 340, o.str());
}

struct UtilityBar {
  std::string label;
  double g_a_true = 0.0;
  double g_a_surrogate = 0.0;
  double g_p_mean = 0.0;
};

/// Grouped bars per result: true g_a, surrogate g_a, mean g_p.
inline std::string utilities_svg(const std::vector<UtilityBar>& bars) {
  if (bars.empty()) throw DomainError("utilities chart needs at least one entry");
  double lo = 0.0, hi = 0.0;
  for (const auto& b : bars) {
    for (double v : {b.g_a_true, b.g_a_surrogate, b.g_p_mean}) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double x0 = 80, y0 = 40, h = 260;
  const double group = 54.0, w = std::max(300.0, group * static_cast<double>(bars.size()));
  auto Y = [&](double v) { return y0 + h * (hi - v) / (hi - lo); };
  std::ostringstream o;
  o << "<text x=\"" << svg::f2(x0) << "\" y=\"" << svg::f2(y0 - 12) << "\" font-size=\"13\">Player utilities ($)</text>\n";
  o << "<line x1=\"" << svg::f2(x0) << "\" x2=\"" << svg::f2(x0 + w) << "\" y1=\"" << svg::f2(Y(0)) << "\" y2=\""
    << svg::f2(Y(0)) << "\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    o << "<text x=\"" << svg::f2(x0 - 6) << "\" y=\"" << svg::f2(Y(v) + 4)
      << "\" font-size=\"10\" text-anchor=\"end\">" << svg::label(v) << "</text>\n";
  }
  const char* names[] = {"g_a true", "g_a surrogate", "mean g_p"};
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double gx = x0 + group * static_cast<double>(i) + 6;
    const double vals[] = {bars[i].g_a_true, bars[i].g_a_surrogate, bars[i].g_p_mean};
    for (int k = 0; k < 3; ++k) {
      const double v = std::isfinite(vals[k]) ? vals[k] : 0.0;
      const double top = std::min(Y(v), Y(0)), bh = std::abs(Y(v) - Y(0));
      o << "<rect x=\"" << svg::f2(gx + 14.0 * k) << "\" y=\"" << svg::f2(top) << "\" width=\"12.00\" height=\""
        << svg::f2(bh) << "\" fill=\"" << svg::kPalette[k] << "\"/>\n";
    }
    o << "<text x=\"" << svg::f2(gx + 21) << "\" y=\"" << svg::f2(y0 + h + 14)
      << "\" font-size=\"9\" text-anchor=\"end\" transform=\"rotate(-45 " << svg::f2(gx + 21) << ' '
      << svg::f2(y0 + h + 14) << ")\">" << bars[i].label << "</text>\n";
  }
  for (int k = 0; k < 3; ++k) {
    o << "<text x=\"" << svg::f2(x0 + w + 12) << "\" y=\"" << svg::f2(y0 + 14 + 16.0 * k) << "\" font-size=\"11\" fill=\""
      << svg::kPalette[k] << "\">" << names[k] << "</text>\n";
  }
  return svg::document(x0 + w + 120, y0 + h + 90, o.str());
}

namespace detail {
inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write '" + p.string() + "'");
  out << s;
  if (!out) throw DataError("write failed for '" + p.string() + "'");
}

inline std::filesystem::path chart_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create '" + out_dir + "': " + ec.message());
  return out_dir;
}
}  // namespace detail

/// Per day: prices_demand_<date>.svg and convergence_<date>.svg; plus one
/// utilities.svg across all days. Returns the written paths.
inline std::vector<std::string> emit_charts(const std::vector<DayResult>& results, const std::string& out_dir) {
  if (results.empty()) throw DomainError("emit_charts: no results");
  const auto dir = detail::chart_dir(out_dir);
  std::vector<std::string> out;
  std::vector<UtilityBar> bars;
  for (const auto& r : results) {
    const auto a = dir / ("prices_demand_" + r.date + ".svg");
    const auto b = dir / ("convergence_" + r.date + ".svg");
    detail::write_text(a, prices_demand_svg(r));
    detail::write_text(b, convergence_svg(r.date, r.innovation_norms));
    out.push_back(a.string());
    out.push_back(b.string());
    double gp = 0.0;
    for (double g : r.g_p) gp += g;
    bars.push_back({r.date, r.g_a_true, r.g_a_surrogate, r.g_p.empty() ? 0.0 : gp / static_cast<double>(r.g_p.size())});
  }
  const auto u = dir / "utilities.svg";
  detail::write_text(u, utilities_svg(bars));
  out.push_back(u.string());
  return out;
}

/// utilities.svg with one bar group per sweep cell (monthly means when present).
inline std::vector<std::string> emit_charts(const std::vector<SweepRow>& rows, const std::string& out_dir) {
  if (rows.empty()) throw DomainError("emit_charts: empty sweep");
  bool monthly = false;
  for (const auto& r : rows) monthly = monthly || r.monthly_mean;
  std::vector<UtilityBar> bars;
  for (const auto& r : rows) {
    if (r.status != "ok" && !r.monthly_mean) continue;
    if (monthly != r.monthly_mean) continue;
    bars.push_back({r.date + " a=" + svg::label(r.a) + " " + r.q_rule + " J=" + std::to_string(r.J) + " s=" +
                        std::to_string(r.seed),
                    r.g_a_true, r.g_a_surrogate, r.g_p_mean});
  }
  if (bars.empty()) throw DomainError("emit_charts: every sweep cell failed");
  const auto dir = detail::chart_dir(out_dir);
  const auto u = dir / "utilities.svg";
  detail::write_text(u, utilities_svg(bars));
  return {u.string()};
}

}  // namespace dragg::io
