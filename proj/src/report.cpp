#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "corral/harness.hpp"

namespace corral {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.run_id << ',' << r.seed << ',' << r.algorithm << ',' << r.t << ','
       << format_double(r.realized_loss) << ',' << format_double(r.cum_loss) << ','
       << format_double(r.cum_regret) << ',' << r.segment_id << ',' << format_double(r.p_max)
       << ',' << r.diag << '\n';
  }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_num(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    if (s == "nan") return std::nan("");
    throw ConfigError("csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

std::vector<TraceRow> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ConfigError("csv header mismatch: '" + line + "'");
  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 10) {
      throw ConfigError("csv line " + std::to_string(lineno) + ": expected 10 fields, got " +
                        std::to_string(f.size()));
    }
    TraceRow r;
    r.run_id = f[0];
    r.seed = static_cast<std::uint64_t>(parse_num(f[1], lineno));
    r.algorithm = f[2];
    r.t = static_cast<int>(parse_num(f[3], lineno));
    r.realized_loss = parse_num(f[4], lineno);
    r.cum_loss = parse_num(f[5], lineno);
    r.cum_regret = parse_num(f[6], lineno);
    r.segment_id = static_cast<int>(parse_num(f[7], lineno));
    r.p_max = parse_num(f[8], lineno);
    r.diag = f[9];
    rows.push_back(std::move(r));
  }
  return rows;
}

MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  if (xs.empty()) return out;
  double s = 0.0;
  for (double x : xs) s += x;
  out.mean = s / xs.size();
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.stderr_ = std::sqrt(ss / (xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<TraceRow>& rows) {
  // Keeps first-appearance order of algorithms; t ascending within each.
  std::vector<std::string> order;
  std::map<std::string, std::map<int, std::vector<double>>> groups;
  for (const auto& r : rows) {
    if (r.t <= 0 || std::isnan(r.cum_regret)) continue;
    if (!groups.count(r.algorithm)) order.push_back(r.algorithm);
    groups[r.algorithm][r.t].push_back(r.cum_regret);
  }
  std::vector<SummaryRow> out;
  for (const auto& a : order) {
    for (const auto& [t, xs] : groups[a]) {
      const MeanStderr ms = mean_stderr(xs);
      out.push_back({a, t, static_cast<int>(xs.size()), ms.mean, ms.stderr_});
    }
  }
  return out;
}

std::vector<RatioRow> ratio_table(const std::vector<SummaryRow>& summary) {
  std::vector<RatioRow> out;
  std::size_t i = 0;
  while (i < summary.size()) {
    std::size_t j = i;
    while (j < summary.size() && summary[j].algorithm == summary[i].algorithm) ++j;
    const int T = summary[j - 1].t;
    double quarter = std::nan(""), half = std::nan(""), fin = summary[j - 1].mean;
    for (std::size_t k = i; k < j; ++k) {
      if (summary[k].t == T / 4) quarter = summary[k].mean;
      if (summary[k].t == T / 2) half = summary[k].mean;
    }
    out.push_back({summary[i].algorithm, fin / quarter, fin / half});
    i = j;
  }
  return out;
}

void print_summary(std::ostream& os, const std::vector<SummaryRow>& summary,
                   const std::vector<RatioRow>& ratios) {
  os << fmt::format("{:<32} {:>8} {:>5} {:>16} {:>12}\n", "algorithm", "t", "n", "mean_regret",
                    "stderr");
  for (const auto& s : summary) {
    os << fmt::format("{:<32} {:>8} {:>5} {:>16.6f} {:>12.6f}\n", s.algorithm, s.t, s.n, s.mean,
                      s.stderr_);
  }
  os << '\n'
     << fmt::format("{:<32} {:>14} {:>14}\n", "algorithm", "R(T)/R(T/4)", "R(T)/R(T/2)");
  for (const auto& r : ratios) {
    os << fmt::format("{:<32} {:>14.4f} {:>14.4f}\n", r.algorithm, r.final_over_quarter,
                      r.final_over_half);
  }
}

}  // namespace corral
