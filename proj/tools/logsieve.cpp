// logsieve command-line tool: index, query, stats, check, gen, inspect.
#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include "logsieve/audit.hpp"
#include "logsieve/errors.hpp"
#include "logsieve/executor.hpp"
#include "logsieve/generator.hpp"
#include "logsieve/indexer.hpp"
#include "logsieve/logio.hpp"
#include "logsieve/planner.hpp"

using namespace logsieve;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUser = 1, kCorrupt = 2, kInternal = 3 };

/// Raised for usage problems the CLI itself detects.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Common {
  std::string root;
  std::string log = "main";
  std::string format = "json";
  bool log_given = false;

  std::filesystem::path root_path() const {
    if (!root.empty()) return root;
    if (const char* env = std::getenv("LOGSIEVE_ROOT"); env && *env) return env;
    throw UsageError("no store root: pass --root or set LOGSIEVE_ROOT");
  }
  bool table() const { return format == "table"; }
};

void emit(const Common& c, const json& j, const std::function<void(std::ostream&)>& table) {
  if (c.table()) {
    table(std::cout);
  } else {
    std::cout << j.dump(2) << '\n';
  }
}

Store open_existing(const Common& c, const std::string& log) {
  const auto root = c.root_path();
  if (!Store::exists(root, log)) throw UsageError("no log database '" + log + "' under " + root.string());
  return Store::open(root, log);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Query from --q or --query-file. Without a FROM clause the query targets --log.
Query load_query(const Common& c, const std::string& text, const std::string& file) {
  if (text.empty() == file.empty()) throw UsageError("give exactly one of --q and --query-file");
  const std::string src = text.empty() ? read_file(file) : text;
  Query q = parse_query(src);
  const auto lead = src.find_first_not_of(" \t\r\n");
  const bool has_from = lead != std::string::npos && src[lead] == '{'
                            ? json::parse(src).contains("from")
                            : std::regex_search(src, std::regex(R"((^|\s)FROM\s)", std::regex::icase));
  if (!has_from) {
    q.log_name = c.log;
  } else if (c.log_given && q.log_name != c.log) {
    throw UsageError("--log " + c.log + " disagrees with FROM " + q.log_name);
  }
  return q;
}

std::string event_text(const json& e) {
  std::string s = e["type"].get<std::string>();
  if (!e["ts"].is_null()) s += "@" + format_timestamp(e["ts"].get<Timestamp>());
  if (!e["pos"].is_null()) s += "#" + std::to_string(e["pos"].get<Position>());
  if (e.contains("trace_id")) s += "[t" + std::to_string(e["trace_id"].get<TraceId>()) + "]";
  return s;
}

void print_report_table(std::ostream& os, const ConsistencyReport& r) {
  os << (r.consistent() ? "consistent\n" : "inconsistent\n");
  for (const auto& t : r.unknown_types) os << "  unknown type: " << t << '\n';
  for (const auto& p : r.missing_pairs) os << "  unseen pair: (" << p.first << ", " << p.second << ")\n";
  for (const auto& u : r.unsatisfiable_constraints) {
    os << "  unsatisfiable: " << to_string(u.constraint.kind) << ' ' << to_string(u.constraint.mode) << ' '
       << u.constraint.value << " on " << u.constraint.i << ".." << u.constraint.j << " (recorded " << u.min_duration
       << ".." << u.max_duration << ")\n";
  }
}

// -- commands ---------------------------------------------------------------

struct IndexArgs {
  std::vector<std::string> inputs;
  std::string input_format;
  std::string mode, compression;
  std::int64_t split_every_days = 0, lookback = 0;
  std::uint64_t trace_split = 0;
  bool serial = false;
};

int cmd_index(const Common& c, const IndexArgs& a) {
  const auto root = c.root_path();
  // Every file is parsed before the store is touched, so a bad row leaves no trace on disk.
  std::vector<std::vector<Event>> batches;
  for (const auto& path : a.inputs) {
    LogFormat fmt = LogFormat::kCsv;
    if (!a.input_format.empty()) {
      fmt = parse_log_format(a.input_format);
    } else if (path.ends_with(".jsonl") || path.ends_with(".ndjson")) {
      fmt = LogFormat::kJsonl;
    }
    batches.push_back(read_log_file(path, fmt));
  }
  const bool configured = !a.mode.empty() || !a.compression.empty() || a.split_every_days || a.lookback || a.trace_split;
  std::optional<Store> store;
  if (Store::exists(root, c.log) && !configured) {
    store.emplace(Store::open(root, c.log));
  } else {
    StoreConfig cfg;
    cfg.log_name = c.log;
    if (!a.mode.empty()) cfg.mode = parse_store_mode(a.mode);
    if (!a.compression.empty()) cfg.compression = parse_compression(a.compression);
    if (a.split_every_days) cfg.split_every_days = a.split_every_days;
    if (a.lookback) cfg.lookback = a.lookback;
    if (a.trace_split) cfg.trace_split = a.trace_split;
    std::filesystem::create_directories(root);
    store.emplace(Store::open_or_create(root, cfg));
  }
  json out = json::array();
  for (std::size_t k = 0; k < batches.size(); ++k) {
    const auto r = ingest(*store, batches[k], {.parallel = !a.serial});
    out.push_back({{"input", a.inputs[k]},
                   {"traces_touched", r.traces_touched},
                   {"events_ingested", r.events_ingested},
                   {"pairs_created", r.pairs_created},
                   {"segments_rewritten", r.segments_rewritten},
                   {"wall_time_ms", r.wall_time_ms}});
  }
  emit(c, out.size() == 1 ? out[0] : out, [&](std::ostream& os) {
    for (const auto& r : out) {
      os << r["input"].get<std::string>() << ": " << r["events_ingested"] << " events, " << r["traces_touched"]
         << " traces, " << r["pairs_created"] << " pairs, " << r["segments_rewritten"] << " segments, "
         << r["wall_time_ms"].get<double>() << " ms\n";
    }
  });
  return kOk;
}

int cmd_query(const Common& c, const std::string& text, const std::string& file, bool serial) {
  const Query q = load_query(c, text, file);
  const Store store = open_existing(c, q.log_name);
  const auto res = execute(store, q, {.parallel = !serial});
  const auto j = to_json(res);
  emit(c, j, [&](std::ostream& os) {
    if (res.rejected) {
      os << "rejected: ";
      print_report_table(os, res.consistency);
      return;
    }
    if (!res.consistency.consistent()) {
      os << "warning: ";
      print_report_table(os, res.consistency);
    }
    for (const auto& r : j["results"]) {
      os << (r.contains("group") ? "group " + std::to_string(r["group"].get<std::size_t>())
                                 : "trace " + std::to_string(r["trace_id"].get<TraceId>()))
         << '\n';
      for (const auto& occ : r["occurrences"]) {
        os << " ";
        for (const auto& pm : occ)
          for (const auto& e : pm["events"]) os << ' ' << event_text(e);
        os << '\n';
      }
    }
    for (const auto& e : res.explanations) {
      os << "near miss: trace " << e.trace_id << ", cost " << e.cost << ':';
      for (const auto& m : e.events)
        os << ' ' << m.original.event_type << '@' << m.original.ts << "->" << m.modified_ts;
      os << '\n';
    }
    os << res.matches.size() << " matching, " << res.candidates << " candidates, " << res.pairs_read
       << " pairs read; fetch+prune " << res.timing.fetch_prune_ms << " ms, validation " << res.timing.validation_ms
       << " ms, total " << res.timing.total_ms << " ms\n";
  });
  return res.rejected ? kUser : kOk;
}

int cmd_check(const Common& c, const std::string& text, const std::string& file) {
  const Query q = load_query(c, text, file);
  const Store store = open_existing(c, q.log_name);
  const auto r = check_consistency(store, q);
  emit(c, to_json(r), [&](std::ostream& os) { print_report_table(os, r); });
  return r.consistent() ? kOk : kUser;
}

int cmd_stats(const Common& c, const std::string& pattern) {
  const Store store = open_existing(c, c.log);
  if (pattern.empty()) {
    const auto counts = store.read_counts();
    const auto types = store.known_types();
    std::uint64_t pairs = 0;
    for (const auto& [_, rec] : counts) pairs += rec.total_completions;
    const auto& cfg = store.config();
    json j{{"log", cfg.log_name},
           {"mode", to_string(cfg.mode)},
           {"event_types", types.size()},
           {"et_pairs", counts.size()},
           {"event_pairs", pairs}};
    emit(c, j, [&](std::ostream& os) {
      os << cfg.log_name << " (" << to_string(cfg.mode) << "): " << types.size() << " event types, " << counts.size()
         << " et-pairs, " << pairs << " event-pairs\n";
    });
    return kOk;
  }
  std::vector<std::string> types;
  for (const auto& e : parse_pattern(pattern)) {
    if (e.op != Operator::kSimple) throw UsageError("stats takes a pattern of plain event types");
    types.push_back(e.event_type);
  }
  if (types.size() < 2) throw UsageError("stats needs at least two event types");
  const auto stats = stats_query(store, types);
  json j = json::array();
  for (const auto& s : stats) {
    json row{{"pair", {s.pair.first, s.pair.second}}, {"found", s.found}};
    if (s.found) {
      row.update({{"total", s.total}, {"sum", s.sum}, {"min", s.min}, {"max", s.max}, {"mean", s.mean}});
    }
    j.push_back(row);
  }
  emit(c, j, [&](std::ostream& os) {
    for (const auto& s : stats) {
      os << '(' << s.pair.first << ", " << s.pair.second << ") ";
      if (!s.found) {
        os << "never seen\n";
        continue;
      }
      os << "total " << s.total << ", mean " << s.mean << ", min " << s.min << ", max " << s.max << '\n';
    }
  });
  return kOk;
}

struct GenArgs {
  GenParams params;
  std::string distribution = "uniform";
  std::string output;
};

int cmd_gen(const Common&, GenArgs a) {
  a.params.distribution = parse_distribution(a.distribution);
  const auto events = generate_log(a.params);
  if (a.output.empty() || a.output == "-") {
    write_csv(std::cout, events);
  } else {
    std::ofstream out(a.output);
    if (!out) throw UsageError("cannot write " + a.output);
    write_csv(out, events);
  }
  return kOk;
}

struct InspectArgs {
  std::string table;
  std::string pair;
  std::string type;
  std::vector<TraceId> traces;
  bool audit = false;
};

json interval_json(const Interval& iv) { return {format_timestamp(iv.start), format_timestamp(iv.end)}; }

// JSON-lines dump of one table (or a summary of all of them).
int cmd_inspect(const Common& c, const InspectArgs& a) {
  const Store store = open_existing(c, c.log);
  auto line = [](const json& j) { std::cout << j.dump() << '\n'; };
  if (a.audit) {
    const auto r = audit_store(store);
    json j{{"ok", r.ok()},
           {"problems", r.problems},
           {"pairs_checked", r.pairs_checked},
           {"single_entries_checked", r.single_entries_checked},
           {"last_checked_entries", r.last_checked_entries}};
    emit(c, j, [&](std::ostream& os) {
      os << (r.ok() ? "audit ok" : "audit FAILED") << ": " << r.pairs_checked << " pairs, "
         << r.single_entries_checked << " single entries, " << r.last_checked_entries << " watermarks\n";
      for (const auto& p : r.problems) os << "  " << p << '\n';
    });
    return r.ok() ? kOk : kCorrupt;
  }
  if (a.table.empty()) {
    const auto& cfg = store.config();
    json j{{"log", cfg.log_name},
           {"mode", to_string(cfg.mode)},
           {"split_every_days", cfg.split_every_days},
           {"trace_split", cfg.trace_split},
           {"lookback_days", cfg.lookback},
           {"compression", to_string(cfg.compression)},
           {"origin", store.origin() ? json(format_timestamp(*store.origin())) : json()}};
    j["index_intervals"] = json::array();
    for (const auto& iv : store.index_intervals()) {
      j["index_intervals"].push_back({{"interval", interval_json(iv)}, {"first_types", store.index_first_types(iv)}});
    }
    j["sequence_ranges"] = json::array();
    for (const auto& r : store.sequence_ranges()) j["sequence_ranges"].push_back({r.lo, r.hi});
    emit(c, j, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    return kOk;
  }
  if (a.table == "index") {
    std::optional<EtPair> only;
    if (!a.pair.empty()) {
      const auto comma = a.pair.find(',');
      if (comma == std::string::npos) throw UsageError("--pair takes FIRST,SECOND");
      only = EtPair{a.pair.substr(0, comma), a.pair.substr(comma + 1)};
    }
    for (const auto& iv : store.index_intervals()) {
      for (const auto& first : store.index_first_types(iv)) {
        if (only && only->first != first) continue;
        const auto seg = store.load_index_segment(iv, first);
        if (!seg) continue;
        for (const auto& [second, pairs] : seg->entries) {
          if (only && only->second != second) continue;
          for (const auto& p : pairs) {
            line({{"interval", interval_json(iv)}, {"pair", {first, second}}, {"trace_id", p.trace_id},
                  {"first_ts", p.first_ts}, {"second_ts", p.second_ts}, {"first_pos", p.first_pos},
                  {"second_pos", p.second_pos}});
          }
        }
      }
    }
  } else if (a.table == "single") {
    for (const auto& iv : store.single_intervals()) {
      for (const auto& type : store.single_types(iv)) {
        if (!a.type.empty() && a.type != type) continue;
        const auto seg = store.load_single_segment(iv, type);
        if (!seg) continue;
        for (const auto& e : seg->entries)
          line({{"interval", interval_json(iv)}, {"type", type}, {"trace_id", e.trace_id}, {"ts", e.ts}, {"pos", e.pos}});
      }
    }
  } else if (a.table == "seq") {
    std::vector<TraceId> ids = a.traces;
    if (ids.empty()) {
      for (const auto& r : store.sequence_ranges()) {
        if (auto seg = store.load_sequence_segment(r))
          for (const auto& [id, _] : seg->traces) ids.push_back(id);
      }
    }
    for (const auto& [id, t] : store.read_sequences(ids)) {
      json evs = json::array();
      for (const auto& e : t.events) evs.push_back({{"type", e.event_type}, {"ts", e.ts}, {"pos", e.pos}});
      line({{"trace_id", id}, {"events", evs}});
    }
  } else if (a.table == "last") {
    for (const auto& r : store.last_checked_ranges()) {
      const auto seg = store.load_last_checked_segment(r);
      if (!seg) continue;
      for (const auto& [key, ts] : seg->entries)
        line({{"pair", {key.pair.first, key.pair.second}}, {"trace_id", key.trace_id}, {"ts_last", ts}});
    }
  } else if (a.table == "count") {
    for (const auto& [et, rec] : store.read_counts()) {
      line({{"pair", {et.first, et.second}}, {"total", rec.total_completions}, {"sum", rec.sum_durations},
            {"min", rec.min_duration}, {"max", rec.max_duration}});
    }
  } else {
    throw UsageError("unknown table '" + a.table + "' (index, single, seq, last, count)");
  }
  return kOk;
}

int fail(int code, const std::string& kind, const std::string& msg) {
  std::cerr << "logsieve: " << kind << ": " << msg << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"logsieve: pattern queries over indexed event logs"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--root", common.root, "Store root directory (default $LOGSIEVE_ROOT)");
  auto* log_opt = app.add_option("--log", common.log, "Log database name")->capture_default_str();
  app.add_option("--format", common.format, "Output format")->check(CLI::IsMember({"json", "table"}))->capture_default_str();

  IndexArgs ia;
  auto* index = app.add_subcommand("index", "Append a batch of events to a log database");
  index->add_option("--input", ia.inputs, "Log file(s), ingested in order")->required();
  index->add_option("--input-format", ia.input_format, "csv or jsonl (default by extension)");
  index->add_option("--mode", ia.mode, "ts or pos (new stores)");
  index->add_option("--split-every-days", ia.split_every_days, "Time partition width in days");
  index->add_option("--trace-split", ia.trace_split, "Traces per sequence partition");
  index->add_option("--lookback", ia.lookback, "Maximum pair separation in days");
  index->add_option("--compression", ia.compression, "none or deflate");
  index->add_flag("--serial", ia.serial, "Use the single-threaded extraction kernel");

  std::string qtext, qfile;
  bool qserial = false;
  auto* query = app.add_subcommand("query", "Run a pattern query");
  query->add_option("--q", qtext, "Query text (FROM ... PATTERN ...)");
  query->add_option("--query-file", qfile, "Query file, text or JSON");
  query->add_flag("--serial", qserial, "Match candidate streams on one thread");

  std::string ctext, cfile;
  auto* check = app.add_subcommand("check", "Check a query against the store's metadata");
  check->add_option("--q", ctext, "Query text");
  check->add_option("--query-file", cfile, "Query file, text or JSON");

  std::string spattern;
  auto* stats = app.add_subcommand("stats", "Duration statistics of consecutive pairs, or a store summary");
  stats->add_option("--pattern", spattern, "Event types separated by ';'");

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Write a synthetic log as CSV");
  gen->add_option("--seed", ga.params.seed)->capture_default_str();
  gen->add_option("--traces", ga.params.traces)->capture_default_str();
  gen->add_option("--mean-length", ga.params.mean_length)->capture_default_str();
  gen->add_option("--alphabet", ga.params.alphabet)->capture_default_str();
  gen->add_option("--distribution", ga.distribution, "uniform or powerlaw")->capture_default_str();
  gen->add_option("--days", ga.params.days, "Days the traces start on")->capture_default_str();
  gen->add_option("--carry-over", ga.params.carry_over, "Fraction of traces crossing midnight")->capture_default_str();
  gen->add_option("--base-ts", ga.params.base_ts, "Midnight of the first day, epoch ms")->capture_default_str();
  gen->add_option("--output,-o", ga.output, "Output path (default stdout)");

  InspectArgs na;
  auto* inspect = app.add_subcommand("inspect", "Summarize or dump a log database");
  inspect->add_option("--table", na.table, "index, single, seq, last or count (JSON lines)");
  inspect->add_option("--pair", na.pair, "Restrict the index dump to FIRST,SECOND");
  inspect->add_option("--type", na.type, "Restrict the single dump to one type");
  inspect->add_option("--trace", na.traces, "Restrict the sequence dump to these traces");
  inspect->add_flag("--audit", na.audit, "Verify the storage invariants");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUser;
  }
  common.log_given = log_opt->count() > 0;

  try {
    if (*index) return cmd_index(common, ia);
    if (*query) return cmd_query(common, qtext, qfile, qserial);
    if (*check) return cmd_check(common, ctext, cfile);
    if (*stats) return cmd_stats(common, spattern);
    if (*gen) return cmd_gen(common, ga);
    if (*inspect) return cmd_inspect(common, na);
  } catch (const CorruptionError& e) {
    return fail(kCorrupt, "store corruption", e.what());
  } catch (const ContractError& e) {
    return fail(kInternal, "internal error", e.what());
  } catch (const json::exception& e) {
    return fail(kUser, "error", e.what());
  } catch (const Error& e) {
    return fail(kUser, "error", e.what());
  } catch (const std::exception& e) {
    return fail(kInternal, "internal error", e.what());
  }
  return kInternal;
}
