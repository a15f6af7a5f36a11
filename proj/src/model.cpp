#include "logsieve/model.hpp"

#include "logsieve/errors.hpp"

namespace logsieve {

std::vector<std::string> QueryEvent::accepted_types() const {
  std::vector<std::string> out{event_type};
  out.insert(out.end(), alternatives.begin(), alternatives.end());
  return out;
}

const Event* Occurrence::first_event() const {
  for (const auto& m : matches) {
    if (!m.events.empty()) return &m.events.front();
  }
  return nullptr;
}

const Event* Occurrence::last_event() const {
  for (auto it = matches.rbegin(); it != matches.rend(); ++it) {
    if (!it->events.empty()) return &it->events.back();
  }
  return nullptr;
}

std::optional<TraceViolation> validate_trace(const Trace& trace) {
  for (std::size_t k = 0; k < trace.events.size(); ++k) {
    const Event& ev = trace.events[k];
    const auto pos = static_cast<Position>(k + 1);
    if (ev.trace_id != trace.trace_id) return TraceViolation{pos, "event belongs to another trace"};
    if (ev.pos != pos) return TraceViolation{pos, "position is not consecutive"};
    if (ev.event_type.empty()) return TraceViolation{pos, "empty event type"};
    if (k == 0) continue;
    const Timestamp prev = trace.events[k - 1].ts;
    if (ev.ts == prev) return TraceViolation{pos, "duplicate timestamp"};
    if (ev.ts < prev) return TraceViolation{pos, "timestamp out of order"};
  }
  return std::nullopt;
}

bool pairs_overlap(const EventPair& p1, const EventPair& p2) {
  if (p1.trace_id != p2.trace_id) throw ContractError("pairs_overlap: pairs come from different traces");
  return !(p1.first_pos > p2.second_pos || p1.second_pos < p2.first_pos);
}

std::string to_string(Operator op) {
  switch (op) {
    case Operator::kSimple: return "_";
    case Operator::kKleenePlus: return "+";
    case Operator::kKleeneStar: return "*";
    case Operator::kNegation: return "!";
    case Operator::kOr: return "||";
  }
  return "?";
}

std::string to_string(ConstraintKind kind) { return kind == ConstraintKind::kGap ? "gap" : "time"; }

std::string to_string(ConstraintMode mode) { return mode == ConstraintMode::kWithin ? "within" : "atleast"; }

}  // namespace logsieve
