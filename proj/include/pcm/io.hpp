#pragma once

// CSV ingestion and output of book-value panels.
//
// Format: header `period,book_equity,book_liability,payout_equity,payout_liability`
// followed by consecutive integer periods. The first row holds B_0; its
// payout cells may be empty and are ignored. Errors cite the 1-based data
// row (the header is not counted) and the column name.

#include "pcm/model.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace pcm {

struct BookPanel {
  long first_period = 0;
  std::vector<Vec2> books;    // B_0..B_T
  std::vector<Vec2> payouts;  // p_1..p_T
};

BookPanel parse_panel_csv(std::istream& in);
BookPanel read_panel_csv(const std::string& path);

/// Parses and derives the observed series.
ObservedSeries ingest_csv(const std::string& path);

/// Writes books and payouts with 17 significant digits.
void write_panel_csv(std::ostream& out, const BookPanel& panel);

}  // namespace pcm
