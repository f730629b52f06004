#include "crowdsched/csv.hpp"

#include <stdexcept>

namespace crowdsched::csv {

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row current;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool row_has_content = false;
  long line = 1;
  current.line = 1;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_row = [&] {
    if (row_has_content || !current.fields.empty()) {
      end_field();
      rows.push_back(std::move(current));
    }
    current = Row{};
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw std::runtime_error("line " + std::to_string(line) +
                                   ": quote inside unquoted field");
        }
        in_quotes = true;
        field_was_quoted = true;
        row_has_content = true;
        break;
      case ',':
        end_field();
        row_has_content = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        end_row();
        ++line;
        current.line = line;
        break;
      default:
        if (field_was_quoted) {
          throw std::runtime_error("line " + std::to_string(line) +
                                   ": text after closing quote");
        }
        field.push_back(c);
        row_has_content = true;
    }
  }
  if (in_quotes) {
    throw std::runtime_error("line " + std::to_string(current.line) + ": unterminated quoted field");
  }
  end_row();
  return rows;
}

std::string escape(std::string_view field, bool force) {
  bool needs_quotes = force;
  if (!needs_quotes) {
    needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!field.empty() && (field.front() == ' ' || field.back() == ' ')) needs_quotes = true;
  }
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace crowdsched::csv
