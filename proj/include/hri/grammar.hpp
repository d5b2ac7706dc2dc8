#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hri/deixis.hpp"

namespace hri {

enum class Verb { Home, Drop, Move, Pick, Place, Pour, Throw, Give };

std::string_view to_string(Verb verb);
std::optional<Verb> verb_from_string(std::string_view name);
/// pick, place and pour act on a pointed-at object; the rest do not.
bool verb_requires_target(Verb verb);

enum class MetricKind { Angle, Velocity };

/// Angle in degrees, velocity in m/s.
struct Metric {
  MetricKind kind = MetricKind::Angle;
  double value = 0.0;
  bool operator==(const Metric&) const = default;
};

struct VerbalUtterance {
  std::string text;
  double timestamp = 0.0;
  std::optional<std::string> speaker;
};

struct ActionCommand {
  Verb verb = Verb::Home;
  bool requires_target = false;
  bool operator==(const ActionCommand&) const = default;
};
struct ApprovalCommand {
  bool operator==(const ApprovalCommand&) const = default;
};
struct MetricCommand {
  Metric metric;
  bool operator==(const MetricCommand&) const = default;
};
struct FinishCommand {
  bool operator==(const FinishCommand&) const = default;
};

using Command = std::variant<ActionCommand, ApprovalCommand, MetricCommand, FinishCommand>;

std::string describe(const Command& command);

/// Fused command: up to two actions with their targets plus one optional
/// metric shared by the whole intention.
struct Intention {
  Verb a1 = Verb::Home;
  std::optional<int> t1;
  std::optional<Verb> a2;
  std::optional<int> t2;
  std::optional<Metric> lambda;

  bool operator==(const Intention&) const = default;

  /// Throws IncompleteIntention when a required target is missing.
  void validate() const;
  /// Pour angle from lambda, or the 90 degree default.
  double pour_angle_deg() const;
  /// e.g. "(pick, 3, pour, 5, angle=90deg)"
  std::string to_tuple_string() const;
};

/// Declared keyword table. Rules are tried in order; the first one that
/// matches wins.
class PhraseTable {
 public:
  static PhraseTable defaults();
  static PhraseTable from_json(const nlohmann::json& j);
  static PhraseTable load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  Command parse(const VerbalUtterance& utterance) const;

 private:
  enum class RuleKind { Finish, Approval, Metric, Action };
  using Phrase = std::vector<std::string>;
  struct Unit {
    Phrase phrase;
    double scale = 1.0;
  };
  struct Rule {
    RuleKind kind = RuleKind::Action;
    std::vector<Phrase> phrases;
    Verb verb = Verb::Home;
    MetricKind metric = MetricKind::Angle;
    std::vector<Unit> units;
  };

  std::optional<Command> try_rule(const Rule& rule, const std::vector<std::string>& tokens) const;

  std::vector<Rule> rules_;
};

/// Reloads the table from disk whenever the file's modification time moves.
class PhraseTableFile {
 public:
  explicit PhraseTableFile(std::filesystem::path path);
  const PhraseTable& current();

 private:
  std::filesystem::path path_;
  std::filesystem::file_time_type stamp_{};
  PhraseTable table_;
};

/// Lowercased word tokens; numbers split from units, "°" spelled out.
std::vector<std::string> tokenize(std::string_view text);

/// "ninety" -> 90, "forty five" -> 45, "zero point five" -> 0.5.
std::optional<double> parse_number_words(const std::vector<std::string>& words);

Command parse_utterance(const VerbalUtterance& utterance,
                        const PhraseTable& table = PhraseTable::defaults());

// ---- interaction state machine --------------------------------------------

namespace phase {
struct Idle {};
struct AwaitingTarget {
  Verb pending = Verb::Pick;
  bool second = false;  // the pending action is the second one
};
struct TargetLatched {};
struct AwaitingSecond {};
struct Complete {
  Intention intention;
};
}  // namespace phase

using Phase = std::variant<phase::Idle, phase::AwaitingTarget, phase::TargetLatched,
                           phase::AwaitingSecond, phase::Complete>;

std::string_view phase_name(const Phase& p);

struct PartialIntention {
  std::optional<Verb> a1;
  std::optional<int> t1;
  std::optional<Verb> a2;
  std::optional<int> t2;
  std::optional<Metric> lambda;
};

struct SessionState {
  Phase phase = phase::Idle{};
  PartialIntention partial;
  /// Most recent pointing result; frozen into the intention on approval.
  std::optional<TargetSelection> live;

  bool complete() const { return std::holds_alternative<phase::Complete>(phase); }
};

using FsmEvent = std::variant<Command, TargetSelection>;

/// Pure transition function. Illegal events throw and leave the caller's
/// state untouched.
SessionState advance(const SessionState& state, const FsmEvent& event);

/// Throws ProtocolViolation unless the state is Complete.
Intention fuse(const SessionState& state);

/// One scripted input: an utterance, or pointing at an object index.
using ScriptStep = std::variant<std::string, int>;

/// Canonical input script that reproduces `intention` through the default
/// phrase table and the state machine.
std::vector<ScriptStep> canonical_script(const Intention& intention);

}  // namespace hri
