#include "logsieve/query.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <set>

#include "logsieve/errors.hpp"
#include "logsieve/logio.hpp"

namespace logsieve {
namespace {

using nlohmann::json;

bool reserved_char(char c) {
  return c == ';' || c == '|' || c == '!' || c == '+' || c == '*' || c == ',' || c == '(' || c == ')' ||
         std::isspace(static_cast<unsigned char>(c));
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::int64_t to_int(std::string_view s, const char* what) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    throw QueryError(std::string(what) + ": expected an integer, got '" + std::string(s) + "'");
  return v;
}

void check_type_name(const std::string& t) {
  if (t.empty()) throw QueryError("empty event type in pattern");
  for (char c : t) {
    if (reserved_char(c)) throw QueryError("event type '" + t + "' contains a reserved character; use the JSON form");
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t k = 0;
  while (k < text.size()) {
    while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
    const std::size_t start = k;
    while (k < text.size() && !std::isspace(static_cast<unsigned char>(text[k]))) ++k;
    if (k > start) out.emplace_back(text.substr(start, k - start));
  }
  return out;
}

Operator parse_op(const std::string& s) {
  if (s == "_" || s == "simple") return Operator::kSimple;
  if (s == "+" || s == "kleene_plus") return Operator::kKleenePlus;
  if (s == "*" || s == "kleene_star") return Operator::kKleeneStar;
  if (s == "!" || s == "negation") return Operator::kNegation;
  if (s == "||" || s == "or") return Operator::kOr;
  throw QueryError("unknown operator '" + s + "'");
}

std::string op_name(Operator op) {
  switch (op) {
    case Operator::kSimple: return "simple";
    case Operator::kKleenePlus: return "kleene_plus";
    case Operator::kKleeneStar: return "kleene_star";
    case Operator::kNegation: return "negation";
    case Operator::kOr: return "or";
  }
  return "simple";
}

Constraint parse_constraint_words(const std::vector<std::string>& w) {
  if (w.size() != 5) throw QueryError("constraint needs: <time|gap> <within|atleast> <value> <i> <j>");
  Constraint c;
  const auto kind = upper(w[0]);
  const auto mode = upper(w[1]);
  if (kind == "TIME") c.kind = ConstraintKind::kTime;
  else if (kind == "GAP") c.kind = ConstraintKind::kGap;
  else throw QueryError("constraint kind must be time or gap, got '" + w[0] + "'");
  if (mode == "WITHIN") c.mode = ConstraintMode::kWithin;
  else if (mode == "ATLEAST") c.mode = ConstraintMode::kAtLeast;
  else throw QueryError("constraint mode must be within or atleast, got '" + w[1] + "'");
  c.value = to_int(w[2], "constraint value");
  c.i = static_cast<int>(to_int(w[3], "constraint position"));
  c.j = static_cast<int>(to_int(w[4], "constraint position"));
  return c;
}

Timestamp window_bound(const std::string& s) {
  try {
    return parse_timestamp(s);
  } catch (const InputError&) {
    throw QueryError("BETWEEN bound '" + s + "' is neither integer ms nor RFC 3339");
  }
}

}  // namespace

bool Query::has_time_constraints() const {
  return std::any_of(constraints.begin(), constraints.end(),
                     [](const Constraint& c) { return c.kind == ConstraintKind::kTime; });
}

bool Query::has_gap_constraints() const {
  return std::any_of(constraints.begin(), constraints.end(),
                     [](const Constraint& c) { return c.kind == ConstraintKind::kGap; });
}

std::vector<std::string> Query::pattern_types() const {
  std::set<std::string> s;
  for (const auto& e : pattern) {
    for (const auto& t : e.accepted_types()) s.insert(t);
  }
  return {s.begin(), s.end()};
}

int Query::mandatory_positions() const {
  return static_cast<int>(std::count_if(pattern.begin(), pattern.end(), [](const QueryEvent& e) { return e.mandatory(); }));
}

void Query::validate() const {
  if (log_name.empty()) throw QueryError("FROM names no log database");
  if (pattern.empty()) throw QueryError("pattern is empty");
  std::size_t expansions = 1;
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    const auto& e = pattern[k];
    if (e.event_type.empty()) throw QueryError("position " + std::to_string(k + 1) + " has an empty event type");
    if (e.op == Operator::kOr) {
      if (e.alternatives.empty()) throw QueryError("or at position " + std::to_string(k + 1) + " has no alternatives");
      for (const auto& a : e.alternatives) {
        if (a.empty()) throw QueryError("empty alternative at position " + std::to_string(k + 1));
      }
      expansions *= 1 + e.alternatives.size();
      if (expansions > kMaxOrAlternatives) throw QueryError("too many or-alternatives");
    } else if (!e.alternatives.empty()) {
      throw QueryError("alternatives given for a non-or position " + std::to_string(k + 1));
    }
  }
  if (pattern.front().op == Operator::kNegation || pattern.back().op == Operator::kNegation)
    throw QueryError("negation may not be the first or last pattern position");
  if (mandatory_positions() == 0)
    throw QueryError("pattern needs at least one simple, kleene_plus or or position");
  const int n = static_cast<int>(pattern.size());
  for (const auto& c : constraints) {
    if (c.i < 1 || c.j > n || c.i >= c.j)
      throw QueryError("constraint positions must satisfy 1 <= i < j <= " + std::to_string(n));
    if (c.value <= 0) throw QueryError("constraint value must be positive");
    for (int p : {c.i, c.j}) {
      const auto op = pattern[static_cast<std::size_t>(p - 1)].op;
      if (op == Operator::kNegation) throw QueryError("constraint references negated position " + std::to_string(p));
      if (op == Operator::kKleeneStar)
        throw QueryError("constraint references kleene_star position " + std::to_string(p));
    }
  }
  if (window && window->from > window->to) throw QueryError("BETWEEN lower bound exceeds upper bound");
  for (const auto& g : groups) {
    if (g.empty()) throw QueryError("empty group");
  }
  if (explain) {
    for (const auto& e : pattern) {
      if (e.op != Operator::kSimple) throw QueryError("EXPLAIN-NON-ANSWERS is only allowed on simple patterns");
    }
    if (explain->k < 0) throw QueryError("explain budget k must be >= 0");
    if (explain->uncertainty < 0) throw QueryError("explain uncertainty must be >= 0");
    if (explain->step < 1) throw QueryError("explain step must be >= 1");
    if (explain->uncertainty % explain->step != 0) throw QueryError("explain uncertainty must be a multiple of step");
    if (!groups.empty()) throw QueryError("EXPLAIN-NON-ANSWERS cannot be combined with GROUPS");
  }
}

std::vector<QueryEvent> parse_pattern(std::string_view text) {
  std::string compact;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
  }
  std::vector<QueryEvent> out;
  std::size_t start = 0;
  while (start <= compact.size()) {
    std::size_t end = compact.find(';', start);
    if (end == std::string::npos) end = compact.size();
    std::string item = compact.substr(start, end - start);
    if (item.empty()) throw QueryError("empty pattern element");
    QueryEvent qe;
    if (item.front() == '!') {
      qe.op = Operator::kNegation;
      item.erase(0, 1);
    } else if (item.back() == '+') {
      qe.op = Operator::kKleenePlus;
      item.pop_back();
    } else if (item.back() == '*') {
      qe.op = Operator::kKleeneStar;
      item.pop_back();
    }
    if (item.find('|') != std::string::npos) {
      if (qe.op != Operator::kSimple) throw QueryError("or cannot be combined with another operator: '" + item + "'");
      qe.op = Operator::kOr;
      std::size_t s = 0;
      std::vector<std::string> parts;
      while (true) {
        const auto bar = item.find('|', s);
        parts.push_back(item.substr(s, bar == std::string::npos ? std::string::npos : bar - s));
        if (bar == std::string::npos) break;
        s = bar + 1;
      }
      for (const auto& p : parts) check_type_name(p);
      qe.event_type = parts.front();
      qe.alternatives.assign(parts.begin() + 1, parts.end());
    } else {
      check_type_name(item);
      qe.event_type = item;
    }
    out.push_back(std::move(qe));
    start = end + 1;
  }
  return out;
}

std::vector<std::vector<TraceId>> parse_groups(std::string_view text) {
  std::string compact;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
  }
  std::vector<std::vector<TraceId>> groups;
  std::size_t k = 0;
  while (k < compact.size()) {
    if (compact[k] != '(') throw QueryError("GROUPS: expected '(' at offset " + std::to_string(k));
    const auto close = compact.find(')', k);
    if (close == std::string::npos) throw QueryError("GROUPS: missing ')'");
    std::string body = compact.substr(k + 1, close - k - 1);
    std::set<TraceId> members;
    std::size_t s = 0;
    while (s <= body.size()) {
      auto comma = body.find(',', s);
      if (comma == std::string::npos) comma = body.size();
      const std::string item = body.substr(s, comma - s);
      const auto dash = item.find('-');
      if (dash == std::string::npos) {
        members.insert(static_cast<TraceId>(to_int(item, "GROUPS member")));
      } else {
        const auto lo = to_int(item.substr(0, dash), "GROUPS range");
        const auto hi = to_int(item.substr(dash + 1), "GROUPS range");
        if (lo < 0 || hi < lo || hi - lo > 1'000'000) throw QueryError("GROUPS: bad range '" + item + "'");
        for (auto id = lo; id <= hi; ++id) members.insert(static_cast<TraceId>(id));
      }
      s = comma + 1;
    }
    groups.emplace_back(members.begin(), members.end());
    k = close + 1;
    if (k < compact.size()) {
      if (compact[k] != ',') throw QueryError("GROUPS: expected ',' between groups");
      ++k;
    }
  }
  if (groups.empty()) throw QueryError("GROUPS clause lists no groups");
  return groups;
}

Query parse_query_text(std::string_view text) {
  static const std::set<std::string> kKeywords = {"FROM",  "PATTERN", "WHERE",  "BETWEEN",
                                                  "GROUPS", "EXPLAIN-NON-ANSWERS", "RETURN-ALL"};
  const auto tokens = tokenize(text);
  std::map<std::string, std::vector<std::string>> clauses;
  std::string current;
  for (const auto& tok : tokens) {
    const auto up = upper(tok);
    if (kKeywords.count(up)) {
      if (clauses.count(up)) throw QueryError("duplicate clause " + up);
      current = up;
      clauses[up];
      continue;
    }
    if (current.empty()) throw QueryError("query must start with FROM or PATTERN, got '" + tok + "'");
    clauses[current].push_back(tok);
  }
  auto joined = [&](const std::string& key) {
    std::string s;
    for (const auto& t : clauses[key]) s += (s.empty() ? "" : " ") + t;
    return s;
  };

  Query q;
  if (clauses.count("FROM")) {
    if (clauses["FROM"].size() != 1) throw QueryError("FROM takes exactly one log name");
    q.log_name = clauses["FROM"].front();
  }
  if (!clauses.count("PATTERN") || clauses["PATTERN"].empty()) throw QueryError("missing PATTERN clause");
  q.pattern = parse_pattern(joined("PATTERN"));

  if (clauses.count("WHERE")) {
    std::string body = joined("WHERE");
    std::size_t s = 0;
    while (s <= body.size()) {
      auto comma = body.find(',', s);
      if (comma == std::string::npos) comma = body.size();
      q.constraints.push_back(parse_constraint_words(tokenize(body.substr(s, comma - s))));
      s = comma + 1;
    }
  }
  if (clauses.count("BETWEEN")) {
    const auto& w = clauses["BETWEEN"];
    if (w.size() != 3 || upper(w[1]) != "AND") throw QueryError("BETWEEN needs: <from> AND <to>");
    q.window = TimeWindow{window_bound(w[0]), window_bound(w[2])};
  }
  if (clauses.count("GROUPS")) q.groups = parse_groups(joined("GROUPS"));
  if (clauses.count("EXPLAIN-NON-ANSWERS")) {
    const auto& w = clauses["EXPLAIN-NON-ANSWERS"];
    if (w.size() != 3) throw QueryError("EXPLAIN-NON-ANSWERS needs: <k> <uncertainty> <step>");
    q.explain = ExplainParams{to_int(w[0], "k"), to_int(w[1], "uncertainty"), to_int(w[2], "step")};
  }
  if (clauses.count("RETURN-ALL")) {
    const auto& w = clauses["RETURN-ALL"];
    const auto v = w.empty() ? std::string("TRUE") : upper(w.front());
    if (w.size() > 1 || (v != "TRUE" && v != "FALSE")) throw QueryError("RETURN-ALL takes true or false");
    q.return_all = v == "TRUE";
  }
  q.validate();
  return q;
}

Query parse_query_json(const json& j) {
  try {
    if (!j.is_object()) throw QueryError("query JSON must be an object");
    static const std::set<std::string> kFields = {"from",   "pattern", "where",      "between",
                                                  "groups", "explain", "return_all"};
    for (const auto& [key, _] : j.items()) {
      if (!kFields.count(key)) throw QueryError("unknown query field '" + key + "'");
    }
    Query q;
    if (j.contains("from")) q.log_name = j.at("from").get<std::string>();
    if (!j.contains("pattern") || !j.at("pattern").is_array()) throw QueryError("query needs a pattern array");
    for (const auto& pe : j.at("pattern")) {
      QueryEvent qe;
      if (pe.is_string()) {
        qe.event_type = pe.get<std::string>();
      } else {
        qe.event_type = pe.at("type").get<std::string>();
        if (pe.contains("op")) qe.op = parse_op(pe.at("op").get<std::string>());
        if (pe.contains("alternatives")) qe.alternatives = pe.at("alternatives").get<std::vector<std::string>>();
      }
      q.pattern.push_back(std::move(qe));
    }
    if (j.contains("where")) {
      for (const auto& c : j.at("where")) {
        q.constraints.push_back(parse_constraint_words(
            {c.at("kind").get<std::string>(), c.at("mode").get<std::string>(), std::to_string(c.at("value").get<std::int64_t>()),
             std::to_string(c.at("i").get<int>()), std::to_string(c.at("j").get<int>())}));
      }
    }
    if (j.contains("between") && !j.at("between").is_null()) {
      const auto& b = j.at("between");
      auto bound = [](const json& v) {
        return v.is_string() ? window_bound(v.get<std::string>()) : v.get<Timestamp>();
      };
      q.window = TimeWindow{bound(b.at("from")), bound(b.at("to"))};
    }
    if (j.contains("groups")) q.groups = j.at("groups").get<std::vector<std::vector<TraceId>>>();
    for (auto& g : q.groups) {
      std::sort(g.begin(), g.end());
      g.erase(std::unique(g.begin(), g.end()), g.end());
    }
    if (j.contains("explain") && !j.at("explain").is_null()) {
      const auto& e = j.at("explain");
      q.explain = ExplainParams{e.at("k").get<std::int64_t>(), e.at("uncertainty").get<std::int64_t>(),
                                e.at("step").get<std::int64_t>()};
    }
    if (j.contains("return_all")) q.return_all = j.at("return_all").get<bool>();
    q.validate();
    return q;
  } catch (const json::exception& e) {
    throw QueryError(std::string("malformed query JSON: ") + e.what());
  }
}

Query parse_query(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw QueryError(std::string("query is not valid JSON: ") + e.what());
    }
    return parse_query_json(j);
  }
  return parse_query_text(text);
}

json to_json(const Query& q) {
  json j;
  j["from"] = q.log_name;
  j["pattern"] = json::array();
  for (const auto& e : q.pattern) {
    json pe{{"type", e.event_type}, {"op", op_name(e.op)}};
    if (!e.alternatives.empty()) pe["alternatives"] = e.alternatives;
    j["pattern"].push_back(pe);
  }
  j["where"] = json::array();
  for (const auto& c : q.constraints) {
    j["where"].push_back({{"kind", to_string(c.kind)}, {"mode", to_string(c.mode)}, {"value", c.value}, {"i", c.i}, {"j", c.j}});
  }
  j["between"] = q.window ? json{{"from", q.window->from}, {"to", q.window->to}} : json(nullptr);
  j["groups"] = q.groups;
  j["explain"] = q.explain ? json{{"k", q.explain->k}, {"uncertainty", q.explain->uncertainty}, {"step", q.explain->step}}
                           : json(nullptr);
  j["return_all"] = q.return_all;
  return j;
}

std::string pattern_to_string(const std::vector<QueryEvent>& pattern) {
  std::string out;
  for (const auto& e : pattern) {
    if (!out.empty()) out += ';';
    switch (e.op) {
      case Operator::kNegation: out += "!" + e.event_type; break;
      case Operator::kKleenePlus: out += e.event_type + "+"; break;
      case Operator::kKleeneStar: out += e.event_type + "*"; break;
      case Operator::kOr:
        out += e.event_type;
        for (const auto& a : e.alternatives) out += "|" + a;
        break;
      case Operator::kSimple: out += e.event_type; break;
    }
  }
  return out;
}

}  // namespace logsieve
