#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace crowdsched::csv {

struct Row {
  long line = 0;  // 1-based line on which the row starts
  std::vector<std::string> fields;
};

/// RFC 4180 reader: quoted fields may hold commas, doubled quotes and
/// newlines. Accepts LF or CRLF endings; blank lines are skipped.
/// Throws std::runtime_error on an unterminated quote.
std::vector<Row> parse(std::string_view text);

/// Quotes `field` when it holds a delimiter, quote, line break or
/// surrounding whitespace, or when `force` is set.
std::string escape(std::string_view field, bool force = false);

}  // namespace crowdsched::csv
