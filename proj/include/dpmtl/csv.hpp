#pragma once

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dpmtl/data.hpp"
#include "dpmtl/errors.hpp"

namespace dpmtl {
namespace detail {

inline std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::size_t parse_index(std::string_view field, std::size_t line_no, const char* what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError("expected a non-negative integer for " + std::string(what) + ", got '" +
                         std::string(field) + "'",
                     line_no);
  return v;
}

inline double parse_real(std::string_view field, std::size_t line_no, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError("expected a real number for " + std::string(what) + ", got '" +
                         std::string(field) + "'",
                     line_no);
  return v;
}

inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  out.append(buf, ptr);
}

}  // namespace detail

// Reads the interaction CSV format: header `user,item,chosen,correct[,position]`,
// integer fields, optional `#options item_id count` directives that override the
// inferred option count, other `#` lines skipped. Counts default to
// (max observed index + 1); items never observed and not covered by a directive
// get the minimum legal count of 2. The result is validated; violations raise
// ValidationError.
inline Dataset parse_interactions(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  bool has_position = false;
  Dataset d;
  std::map<std::size_t, std::size_t> directives;
  std::size_t max_user = 0, max_item = 0;
  std::map<std::size_t, std::size_t> max_option;
  bool any_row = false;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view sv = detail::trim_cr(line);
    if (sv.empty()) continue;
    if (sv.front() == '#') {
      if (sv.starts_with("#options")) {
        const auto fields = detail::split_fields(sv.substr(sv.find(' ') == std::string_view::npos
                                                               ? sv.size()
                                                               : sv.find(' ') + 1));
        // tolerate space- or comma-separated "#options <item> <count>"
        std::vector<std::string_view> parts;
        for (const auto& f : fields)
          for (std::string_view piece = f; !piece.empty();) {
            const std::size_t sp = piece.find(' ');
            const std::string_view head = piece.substr(0, sp);
            if (!head.empty()) parts.push_back(head);
            if (sp == std::string_view::npos) break;
            piece = piece.substr(sp + 1);
          }
        if (parts.size() != 2) throw ParseError("malformed #options directive", line_no);
        const std::size_t item = detail::parse_index(parts[0], line_no, "item_id");
        const std::size_t count = detail::parse_index(parts[1], line_no, "option count");
        directives[item] = count;
      }
      continue;  // other # lines are comments
    }
    if (!header_seen) {
      if (sv == "user,item,chosen,correct")
        has_position = false;
      else if (sv == "user,item,chosen,correct,position")
        has_position = true;
      else
        throw ParseError("expected header 'user,item,chosen,correct[,position]', got '" +
                             std::string(sv) + "'",
                         line_no);
      header_seen = true;
      continue;
    }
    const auto fields = detail::split_fields(sv);
    const std::size_t expected = has_position ? 5 : 4;
    if (fields.size() != expected)
      throw ParseError("expected " + std::to_string(expected) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    Interaction x;
    x.user = detail::parse_index(fields[0], line_no, "user");
    x.item = detail::parse_index(fields[1], line_no, "item");
    x.chosen = detail::parse_index(fields[2], line_no, "chosen");
    x.correct = detail::parse_index(fields[3], line_no, "correct");
    if (has_position && !fields[4].empty())
      x.position = detail::parse_index(fields[4], line_no, "position");
    max_user = std::max(max_user, x.user);
    max_item = std::max(max_item, x.item);
    auto& mo = max_option[x.item];
    mo = std::max({mo, x.chosen, x.correct});
    d.interactions.push_back(x);
    any_row = true;
  }
  if (!header_seen) throw ParseError("empty input: missing header", 1);

  d.num_users = any_row ? max_user + 1 : 0;
  d.num_items = any_row ? max_item + 1 : 0;
  for (const auto& [item, count] : directives) d.num_items = std::max(d.num_items, item + 1);
  d.options_per_item.assign(d.num_items, 2);
  for (const auto& [item, mo] : max_option) d.options_per_item[item] = std::max<std::size_t>(mo + 1, 2);
  for (const auto& [item, count] : directives) d.options_per_item[item] = count;

  require_valid(d);
  return d;
}

// Score CSV: header `user,score`, one real-valued score per user.
inline std::map<std::size_t, double> parse_scores(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::map<std::size_t, double> scores;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view sv = detail::trim_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    if (!header_seen) {
      if (sv != "user,score")
        throw ParseError("expected header 'user,score', got '" + std::string(sv) + "'", line_no);
      header_seen = true;
      continue;
    }
    const auto fields = detail::split_fields(sv);
    if (fields.size() != 2)
      throw ParseError("expected 2 fields, got " + std::to_string(fields.size()), line_no);
    const std::size_t user = detail::parse_index(fields[0], line_no, "user");
    const double score = detail::parse_real(fields[1], line_no, "score");
    if (!scores.emplace(user, score).second)
      throw ParseError("duplicate score for user " + std::to_string(user), line_no);
  }
  if (!header_seen) throw ParseError("empty input: missing header", 1);
  return scores;
}

// Emits the interaction CSV with explicit #options directives for every item,
// so option counts survive a round trip even for sparsely observed items.
inline void write_interactions(const Dataset& d, std::ostream& out) {
  bool any_position = false;
  for (const Interaction& x : d.interactions)
    if (x.position) any_position = true;
  std::string buf;
  buf += any_position ? "user,item,chosen,correct,position\n" : "user,item,chosen,correct\n";
  for (std::size_t i = 0; i < d.num_items; ++i)
    buf += "#options " + std::to_string(i) + " " + std::to_string(d.options_per_item[i]) + "\n";
  for (const Interaction& x : d.interactions) {
    buf += std::to_string(x.user);
    buf += ',';
    buf += std::to_string(x.item);
    buf += ',';
    buf += std::to_string(x.chosen);
    buf += ',';
    buf += std::to_string(x.correct);
    if (any_position) {
      buf += ',';
      if (x.position) buf += std::to_string(*x.position);
    }
    buf += '\n';
  }
  out << buf;
}

inline void write_scores(const std::map<std::size_t, double>& scores, std::ostream& out) {
  std::string buf = "user,score\n";
  for (const auto& [user, score] : scores) {
    buf += std::to_string(user);
    buf += ',';
    detail::append_double(buf, score);
    buf += '\n';
  }
  out << buf;
}

}  // namespace dpmtl
