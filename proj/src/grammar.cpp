#include "hri/grammar.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>

#include "hri/error.hpp"
#include "hri/text.hpp"

namespace hri {

namespace {

constexpr std::array<std::pair<Verb, std::string_view>, 8> kVerbNames{{
    {Verb::Home, "home"},
    {Verb::Drop, "drop"},
    {Verb::Move, "move"},
    {Verb::Pick, "pick"},
    {Verb::Place, "place"},
    {Verb::Pour, "pour"},
    {Verb::Throw, "throw"},
    {Verb::Give, "give"},
}};

std::vector<std::string> split_words(std::string_view phrase) { return tokenize(phrase); }

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

/// Position of `phrase` as a contiguous run in `tokens`, searching from `from`.
std::optional<std::size_t> find_phrase(const std::vector<std::string>& tokens,
                                       const std::vector<std::string>& phrase,
                                       std::size_t from = 0) {
  if (phrase.empty() || phrase.size() > tokens.size()) return std::nullopt;
  for (std::size_t i = from; i + phrase.size() <= tokens.size(); ++i) {
    if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<long>(i))) {
      return i;
    }
  }
  return std::nullopt;
}

const std::map<std::string, int, std::less<>>& small_numbers() {
  static const std::map<std::string, int, std::less<>> m{
      {"zero", 0},     {"one", 1},        {"two", 2},       {"three", 3},    {"four", 4},
      {"five", 5},     {"six", 6},        {"seven", 7},     {"eight", 8},    {"nine", 9},
      {"ten", 10},     {"eleven", 11},    {"twelve", 12},   {"thirteen", 13}, {"fourteen", 14},
      {"fifteen", 15}, {"sixteen", 16},   {"seventeen", 17}, {"eighteen", 18},
      {"nineteen", 19}};
  return m;
}

const std::map<std::string, int, std::less<>>& tens_numbers() {
  static const std::map<std::string, int, std::less<>> m{
      {"twenty", 20}, {"thirty", 30},  {"forty", 40},  {"fifty", 50},
      {"sixty", 60},  {"seventy", 70}, {"eighty", 80}, {"ninety", 90}};
  return m;
}

bool is_number_word(const std::string& w) {
  return small_numbers().count(w) || tens_numbers().count(w) || w == "hundred" || w == "and" ||
         w == "point";
}

std::optional<double> parse_integer_words(const std::vector<std::string>& words) {
  // hundreds? tens? units? -- each slot at most once, in that order.
  if (words.empty()) return std::nullopt;
  int total = 0;
  std::size_t i = 0;
  auto small = [&](std::size_t k) -> std::optional<int> {
    if (k >= words.size()) return std::nullopt;
    auto it = small_numbers().find(words[k]);
    if (it == small_numbers().end()) return std::nullopt;
    return it->second;
  };
  if (words.size() >= 2 && words[1] == "hundred") {
    auto h = small(0);
    if (!h || *h == 0 || *h > 9) return std::nullopt;
    total = *h * 100;
    i = 2;
    if (i < words.size() && words[i] == "and") ++i;
    if (i == words.size()) return total;
  }
  bool had_tens = false;
  if (i < words.size()) {
    if (auto it = tens_numbers().find(words[i]); it != tens_numbers().end()) {
      total += it->second;
      had_tens = true;
      ++i;
    }
  }
  if (i < words.size()) {
    auto u = small(i);
    if (!u) return std::nullopt;
    if (had_tens && (*u == 0 || *u > 9)) return std::nullopt;
    if (total >= 100 && !had_tens && *u == 0) return std::nullopt;
    total += *u;
    ++i;
  }
  if (i != words.size()) return std::nullopt;
  return total;
}

/// Metric defaults and the ordered default table.
nlohmann::json default_table_json() {
  using nlohmann::json;
  auto action = [](std::string_view verb, std::initializer_list<const char*> phrases) {
    return json{{"command", "action"}, {"verb", verb}, {"phrases", phrases}};
  };
  return json{
      {"version", 1},
      {"rules",
       json::array({
           json{{"command", "finish"}, {"phrases", {"finish", "done", "finished"}}},
           json{{"command", "metric"},
                {"metric", "angle"},
                {"units", json::array({json{{"phrase", "degrees"}, {"scale", 1.0}},
                                       json{{"phrase", "degree"}, {"scale", 1.0}},
                                       json{{"phrase", "deg"}, {"scale", 1.0}}})}},
           json{{"command", "metric"},
                {"metric", "velocity"},
                {"units",
                 json::array({json{{"phrase", "meters per second"}, {"scale", 1.0}},
                              json{{"phrase", "metres per second"}, {"scale", 1.0}},
                              json{{"phrase", "meter per second"}, {"scale", 1.0}},
                              json{{"phrase", "m/s"}, {"scale", 1.0}},
                              json{{"phrase", "centimeters per second"}, {"scale", 0.01}},
                              json{{"phrase", "centimetres per second"}, {"scale", 0.01}},
                              json{{"phrase", "cm/s"}, {"scale", 0.01}}})}},
           action("home", {"move to the initial position", "initial position", "go home",
                           "home position", "reset position", "home", "reset"}),
           action("throw", {"throw", "toss"}),
           action("drop", {"drop", "let go", "release"}),
           action("give", {"give", "hand it", "hand me", "pass"}),
           action("pick", {"pick up", "pick", "grab", "take", "lift"}),
           action("place", {"place", "put", "set it down"}),
           action("pour", {"pour"}),
           action("move", {"move"}),
           json{{"command", "approval"},
                {"phrases", {"yes", "this one", "that one", "this", "that", "here", "there",
                             "confirm", "correct", "okay", "ok"}}},
       })}};
}

}  // namespace

std::string_view to_string(Verb verb) {
  for (const auto& [v, name] : kVerbNames) {
    if (v == verb) return name;
  }
  return "?";
}

std::optional<Verb> verb_from_string(std::string_view name) {
  for (const auto& [v, n] : kVerbNames) {
    if (n == name) return v;
  }
  return std::nullopt;
}

bool verb_requires_target(Verb verb) {
  return verb == Verb::Pick || verb == Verb::Place || verb == Verb::Pour;
}

std::string describe(const Command& command) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ActionCommand>) {
          return "Action(" + std::string(to_string(c.verb)) +
                 (c.requires_target ? ", needs target)" : ")");
        } else if constexpr (std::is_same_v<T, ApprovalCommand>) {
          return "Approval";
        } else if constexpr (std::is_same_v<T, MetricCommand>) {
          return c.metric.kind == MetricKind::Angle
                     ? "Metric(angle " + shortest(c.metric.value) + " deg)"
                     : "Metric(velocity " + shortest(c.metric.value) + " m/s)";
        } else {
          return "Finish";
        }
      },
      command);
}

void Intention::validate() const {
  if (verb_requires_target(a1) && !t1) {
    throw Error(ErrorKind::IncompleteIntention,
                std::string(to_string(a1)) + " needs a target object");
  }
  if (!a2 && t2) throw Error(ErrorKind::IncompleteIntention, "second target without action");
  if (a2 && verb_requires_target(*a2) && !t2) {
    throw Error(ErrorKind::IncompleteIntention,
                std::string(to_string(*a2)) + " needs a target object");
  }
}

double Intention::pour_angle_deg() const {
  if (lambda && lambda->kind == MetricKind::Angle) return lambda->value;
  return 90.0;
}

std::string Intention::to_tuple_string() const {
  auto opt_idx = [](const std::optional<int>& t) { return t ? std::to_string(*t) : "-"; };
  std::string s = "(" + std::string(to_string(a1)) + ", " + opt_idx(t1) + ", ";
  s += a2 ? std::string(to_string(*a2)) : "-";
  s += ", " + opt_idx(t2) + ", ";
  if (!lambda) {
    s += "-";
  } else if (lambda->kind == MetricKind::Angle) {
    s += "angle=" + shortest(lambda->value) + "deg";
  } else {
    s += "velocity=" + shortest(lambda->value) + "m/s";
  }
  return s + ")";
}

// ---- tokenizer and number words -------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::string norm;
  norm.reserve(text.size() + 8);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    // UTF-8 degree sign C2 B0
    if (c == 0xC2 && i + 1 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0xB0) {
      norm += " degrees ";
      ++i;
      continue;
    }
    const char prev = norm.empty() ? ' ' : norm.back();
    const char next = i + 1 < text.size() ? text[i + 1] : ' ';
    if (std::isalpha(c)) {
      if (std::isdigit(static_cast<unsigned char>(prev))) norm += ' ';
      norm += static_cast<char>(std::tolower(c));
    } else if (std::isdigit(c)) {
      if (std::isalpha(static_cast<unsigned char>(prev))) norm += ' ';
      norm += static_cast<char>(c);
    } else if (c == '.' && std::isdigit(static_cast<unsigned char>(prev)) &&
               std::isdigit(static_cast<unsigned char>(next))) {
      norm += '.';
    } else if (c == '/' && std::isalpha(static_cast<unsigned char>(prev)) &&
               std::isalpha(static_cast<unsigned char>(next))) {
      norm += '/';
    } else if (c == '\'') {
      // "let's" -> "lets"
    } else {
      norm += ' ';
    }
  }
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < norm.size()) {
    const auto start = norm.find_first_not_of(' ', pos);
    if (start == std::string::npos) break;
    const auto end = norm.find(' ', start);
    tokens.push_back(norm.substr(start, end - start));
    pos = end == std::string::npos ? norm.size() : end;
  }
  return tokens;
}

std::optional<double> parse_number_words(const std::vector<std::string>& words) {
  const auto point = std::find(words.begin(), words.end(), "point");
  const std::vector<std::string> whole(words.begin(), point);
  auto integer = parse_integer_words(whole);
  if (!integer) return std::nullopt;
  if (point == words.end()) return integer;

  std::string digits;
  for (auto it = point + 1; it != words.end(); ++it) {
    auto d = small_numbers().find(*it);
    if (d == small_numbers().end() || d->second > 9) return std::nullopt;
    digits += static_cast<char>('0' + d->second);
  }
  if (digits.empty()) return std::nullopt;
  return parse_double(std::to_string(static_cast<long long>(*integer)) + "." + digits);
}

// ---- phrase table ----------------------------------------------------------

PhraseTable PhraseTable::defaults() {
  static const PhraseTable table = from_json(default_table_json());
  return table;
}

PhraseTable PhraseTable::from_json(const nlohmann::json& j) {
  PhraseTable table;
  try {
    for (const auto& r : j.at("rules")) {
      Rule rule;
      const auto command = r.at("command").get<std::string>();
      if (command == "finish") {
        rule.kind = RuleKind::Finish;
      } else if (command == "approval") {
        rule.kind = RuleKind::Approval;
      } else if (command == "action") {
        rule.kind = RuleKind::Action;
        const auto verb = verb_from_string(r.at("verb").get<std::string>());
        if (!verb) {
          throw Error(ErrorKind::InvalidInput,
                      "phrase table: unknown verb '" + r.at("verb").get<std::string>() + "'");
        }
        rule.verb = *verb;
      } else if (command == "metric") {
        rule.kind = RuleKind::Metric;
        const auto kind = r.at("metric").get<std::string>();
        if (kind == "angle") {
          rule.metric = MetricKind::Angle;
        } else if (kind == "velocity") {
          rule.metric = MetricKind::Velocity;
        } else {
          throw Error(ErrorKind::InvalidInput, "phrase table: unknown metric '" + kind + "'");
        }
        for (const auto& u : r.at("units")) {
          rule.units.push_back(
              Unit{split_words(u.at("phrase").get<std::string>()), u.value("scale", 1.0)});
        }
      } else {
        throw Error(ErrorKind::InvalidInput, "phrase table: unknown command '" + command + "'");
      }
      if (r.contains("phrases")) {
        for (const auto& p : r["phrases"]) rule.phrases.push_back(split_words(p.get<std::string>()));
      }
      if (rule.kind != RuleKind::Metric && rule.phrases.empty()) {
        throw Error(ErrorKind::InvalidInput, "phrase table: rule '" + command + "' has no phrases");
      }
      table.rules_.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("phrase table: ") + e.what());
  }
  return table;
}

PhraseTable PhraseTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open phrase table " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::InvalidInput, "phrase table " + path.string() + ": " + e.what());
  }
}

nlohmann::json PhraseTable::to_json() const {
  using nlohmann::json;
  json rules = json::array();
  for (const auto& r : rules_) {
    json jr;
    switch (r.kind) {
      case RuleKind::Finish: jr["command"] = "finish"; break;
      case RuleKind::Approval: jr["command"] = "approval"; break;
      case RuleKind::Action:
        jr["command"] = "action";
        jr["verb"] = to_string(r.verb);
        break;
      case RuleKind::Metric: {
        jr["command"] = "metric";
        jr["metric"] = r.metric == MetricKind::Angle ? "angle" : "velocity";
        json units = json::array();
        for (const auto& u : r.units) units.push_back({{"phrase", join(u.phrase)}, {"scale", u.scale}});
        jr["units"] = units;
        break;
      }
    }
    if (!r.phrases.empty()) {
      json phrases = json::array();
      for (const auto& p : r.phrases) phrases.push_back(join(p));
      jr["phrases"] = phrases;
    }
    rules.push_back(jr);
  }
  return {{"version", 1}, {"rules", rules}};
}

std::optional<Command> PhraseTable::try_rule(const Rule& rule,
                                             const std::vector<std::string>& tokens) const {
  switch (rule.kind) {
    case RuleKind::Metric:
      for (const auto& unit : rule.units) {
        std::size_t from = 0;
        while (auto at = find_phrase(tokens, unit.phrase, from)) {
          from = *at + 1;
          if (*at == 0) continue;
          // numeral token right before the unit
          if (auto v = parse_double(tokens[*at - 1]); v && std::isfinite(*v)) {
            return MetricCommand{{rule.metric, *v * unit.scale}};
          }
          // longest run of number words ending right before the unit
          std::size_t begin = *at;
          while (begin > 0 && is_number_word(tokens[begin - 1])) --begin;
          for (std::size_t b = begin; b < *at; ++b) {
            const std::vector<std::string> words(tokens.begin() + static_cast<long>(b),
                                                 tokens.begin() + static_cast<long>(*at));
            if (auto v = parse_number_words(words)) {
              return MetricCommand{{rule.metric, *v * unit.scale}};
            }
          }
        }
      }
      return std::nullopt;
    case RuleKind::Finish:
    case RuleKind::Approval:
    case RuleKind::Action:
      for (const auto& phrase : rule.phrases) {
        if (!find_phrase(tokens, phrase)) continue;
        if (rule.kind == RuleKind::Finish) return FinishCommand{};
        if (rule.kind == RuleKind::Approval) return ApprovalCommand{};
        return ActionCommand{rule.verb, verb_requires_target(rule.verb)};
      }
      return std::nullopt;
  }
  return std::nullopt;
}

Command PhraseTable::parse(const VerbalUtterance& utterance) const {
  const auto tokens = tokenize(utterance.text);
  if (tokens.empty()) {
    throw Error(ErrorKind::InvalidInput, "utterance is empty");
  }
  for (const auto& rule : rules_) {
    if (auto cmd = try_rule(rule, tokens)) return *cmd;
  }
  throw Error(ErrorKind::UnrecognizedUtterance, "no command matches \"" + utterance.text + "\"");
}

PhraseTableFile::PhraseTableFile(std::filesystem::path path)
    : path_(std::move(path)), stamp_(std::filesystem::last_write_time(path_)),
      table_(PhraseTable::load(path_)) {}

const PhraseTable& PhraseTableFile::current() {
  std::error_code ec;
  const auto stamp = std::filesystem::last_write_time(path_, ec);
  if (!ec && stamp != stamp_) {
    // A half-written file keeps the previous table in force.
    try {
      table_ = PhraseTable::load(path_);
      stamp_ = stamp;
    } catch (const Error&) {
    }
  }
  return table_;
}

Command parse_utterance(const VerbalUtterance& utterance, const PhraseTable& table) {
  return table.parse(utterance);
}

// ---- state machine ---------------------------------------------------------

std::string_view phase_name(const Phase& p) {
  return std::visit(
      [](const auto& s) -> std::string_view {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, phase::Idle>) return "Idle";
        else if constexpr (std::is_same_v<T, phase::AwaitingTarget>) return "AwaitingTarget";
        else if constexpr (std::is_same_v<T, phase::TargetLatched>) return "TargetLatched";
        else if constexpr (std::is_same_v<T, phase::AwaitingSecond>) return "AwaitingSecond";
        else return "Complete";
      },
      p);
}

namespace {

Intention finalize(const PartialIntention& p) {
  Intention i;
  i.a1 = *p.a1;
  i.t1 = p.t1;
  i.a2 = p.a2;
  i.t2 = p.t2;
  i.lambda = p.lambda;
  i.validate();
  return i;
}

SessionState on_action(SessionState s, const ActionCommand& a) {
  if (std::holds_alternative<phase::Idle>(s.phase)) {
    s.partial.a1 = a.verb;
    if (a.requires_target) {
      s.phase = phase::AwaitingTarget{a.verb, false};
    } else {
      s.phase = phase::TargetLatched{};
    }
    return s;
  }
  if (const auto* wait = std::get_if<phase::AwaitingTarget>(&s.phase)) {
    if (wait->second) throw Error(ErrorKind::TooManyActions, "at most two actions per intention");
    throw Error(ErrorKind::ProtocolViolation,
                std::string(to_string(wait->pending)) + " still needs a target; point and approve");
  }
  if (std::holds_alternative<phase::TargetLatched>(s.phase)) {
    s.partial.a2 = a.verb;
    if (a.requires_target) {
      s.phase = phase::AwaitingTarget{a.verb, true};
    } else {
      s.phase = phase::AwaitingSecond{};
    }
    return s;
  }
  throw Error(ErrorKind::TooManyActions, "at most two actions per intention");
}

SessionState on_approval(SessionState s) {
  const auto* wait = std::get_if<phase::AwaitingTarget>(&s.phase);
  if (!wait) throw Error(ErrorKind::ProtocolViolation, "approval with no pending action");
  if (!s.live) throw Error(ErrorKind::NoCandidates, "approval but nothing is being pointed at");
  if (wait->second) {
    s.partial.t2 = s.live->index;
    s.phase = phase::AwaitingSecond{};
  } else {
    s.partial.t1 = s.live->index;
    s.phase = phase::TargetLatched{};
  }
  return s;
}

SessionState on_metric(const SessionState& state, const Metric& metric) {
  SessionState s;
  s.phase = state.phase;
  s.partial = state.partial;
  s.partial.lambda = metric;
  if (state.live) s.live.emplace(*state.live);
  return s;
}

SessionState on_finish(SessionState s) {
  if (std::holds_alternative<phase::TargetLatched>(s.phase) ||
      std::holds_alternative<phase::AwaitingSecond>(s.phase)) {
    s.phase = phase::Complete{finalize(s.partial)};
    return s;
  }
  throw Error(ErrorKind::IncompleteIntention,
              std::holds_alternative<phase::Idle>(s.phase) ? "finish before any action command"
                                                            : "finish while a target is pending");
}

}  // namespace

SessionState advance(const SessionState& state, const FsmEvent& event) {
  if (const auto* sel = std::get_if<TargetSelection>(&event)) {
    SessionState s = state;
    s.live = *sel;
    return s;
  }
  if (state.complete()) {
    throw Error(ErrorKind::ProtocolViolation, "intention already complete");
  }
  const auto& command = std::get<Command>(event);
  return std::visit(
      [&state](const auto& c) -> SessionState {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ActionCommand>) {
          return on_action(state, c);
        } else if constexpr (std::is_same_v<T, ApprovalCommand>) {
          return on_approval(state);
        } else if constexpr (std::is_same_v<T, MetricCommand>) {
          return on_metric(state, c.metric);
        } else {
          return on_finish(state);
        }
      },
      command);
}

Intention fuse(const SessionState& state) {
  const auto* done = std::get_if<phase::Complete>(&state.phase);
  if (!done) throw Error(ErrorKind::ProtocolViolation, "intention is not complete");
  return done->intention;
}

std::vector<ScriptStep> canonical_script(const Intention& intention) {
  auto phrase = [](Verb v) -> std::string {
    switch (v) {
      case Verb::Home: return "move to the initial position";
      case Verb::Drop: return "drop it";
      case Verb::Move: return "move";
      case Verb::Pick: return "pick up this";
      case Verb::Place: return "place it there";
      case Verb::Pour: return "pour it there";
      case Verb::Throw: return "throw it";
      case Verb::Give: return "give it to me";
    }
    return "";
  };
  std::vector<ScriptStep> script;
  auto action = [&](Verb v, const std::optional<int>& target) {
    script.emplace_back(phrase(v));
    if (target) {
      script.emplace_back(*target);
      script.emplace_back(std::string("this one"));
    }
  };
  action(intention.a1, intention.t1);
  if (intention.a2) action(*intention.a2, intention.t2);
  if (intention.lambda) {
    const auto value = shortest(intention.lambda->value);
    script.emplace_back(intention.lambda->kind == MetricKind::Angle
                            ? "at " + value + " degrees"
                            : "at " + value + " meters per second");
  }
  script.emplace_back(std::string("finish"));
  return script;
}

}  // namespace hri
