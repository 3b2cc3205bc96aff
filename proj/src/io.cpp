#include "pcm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace pcm {

namespace {

constexpr const char* kColumns[5] = {"period", "book_equity", "book_liability", "payout_equity",
                                     "payout_liability"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void fail(std::size_t row, int col, const std::string& what) {
  throw DomainError("row " + std::to_string(row) + ", column " + kColumns[col] + ": " + what);
}

double parse_positive(const std::string& cell, std::size_t row, int col) {
  if (cell.empty()) fail(row, col, "missing value");
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(row, col, "not a number: '" + cell + "'");
  if (!std::isfinite(v) || !(v > 0.0)) fail(row, col, "value must be strictly positive, got " + cell);
  return v;
}

long parse_period(const std::string& cell, std::size_t row) {
  long v = 0;
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end) fail(row, 0, "not an integer: '" + cell + "'");
  return v;
}

}  // namespace

BookPanel parse_panel_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("empty CSV input");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split(trim(line));
  bool ok = header.size() == 5;
  for (std::size_t i = 0; ok && i < 5; ++i) ok = header[i] == kColumns[i];
  if (!ok)
    throw DomainError(
        "malformed header: expected 'period,book_equity,book_liability,payout_equity,payout_liability'");

  BookPanel panel;
  std::size_t row = 0;
  long prev_period = 0;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    ++row;
    const auto cells = split(t);
    if (cells.size() != 5)
      throw DomainError("row " + std::to_string(row) + ": expected 5 columns, got " +
                        std::to_string(cells.size()));
    const long period = parse_period(cells[0], row);
    if (row == 1) {
      panel.first_period = period;
    } else if (period != prev_period + 1) {
      fail(row, 0, "periods must be consecutive, expected " + std::to_string(prev_period + 1) +
                       ", got " + std::to_string(period));
    }
    prev_period = period;
    panel.books.emplace_back(parse_positive(cells[1], row, 1), parse_positive(cells[2], row, 2));
    if (row > 1)
      panel.payouts.emplace_back(parse_positive(cells[3], row, 3), parse_positive(cells[4], row, 4));
  }
  if (panel.books.size() < 2) throw DomainError("need at least two data rows (B_0 and period 1)");
  return panel;
}

BookPanel read_panel_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DomainError("cannot open input file '" + path + "'");
  return parse_panel_csv(f);
}

ObservedSeries ingest_csv(const std::string& path) {
  const BookPanel p = read_panel_csv(path);
  return derive_series(p.books, p.payouts);
}

void write_panel_csv(std::ostream& out, const BookPanel& panel) {
  if (panel.payouts.size() + 1 != panel.books.size())
    throw DomainError("panel needs one more book row than payout rows");
  out << "period,book_equity,book_liability,payout_equity,payout_liability\n";
  char buf[160];
  for (std::size_t t = 0; t < panel.books.size(); ++t) {
    const long period = panel.first_period + static_cast<long>(t);
    if (t == 0) {
      std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,,\n", period, panel.books[t][0],
                    panel.books[t][1]);
    } else {
      std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g\n", period, panel.books[t][0],
                    panel.books[t][1], panel.payouts[t - 1][0], panel.payouts[t - 1][1]);
    }
    out << buf;
  }
}

}  // namespace pcm
