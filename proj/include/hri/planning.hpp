#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hri/grammar.hpp"
#include "hri/scene.hpp"

namespace hri {

// ---- action primitives -----------------------------------------------------

struct MoveTo {
  Vec3 position = Vec3::Zero();
};
struct Pick {
  int object = 0;
};
/// Release onto an object (no motion) or move to a pose and release there.
struct Place {
  std::variant<int, Vec3> target = 0;
};
struct Pour {
  double angle_deg = 90.0;
  int over = 0;
};
struct Home {};
struct Drop {};
struct OpenGripper {
  double width = 0.0;
};
struct CloseGripper {
  double width = 0.0;
};

using ActionPrimitive =
    std::variant<MoveTo, Pick, Place, Pour, Home, Drop, OpenGripper, CloseGripper>;

bool operator==(const ActionPrimitive& a, const ActionPrimitive& b);

/// One primitive with the effector position before and after it. Only
/// MoveTo, Home and Place-at-pose translate; everything else has start == end.
struct ActionStep {
  ActionPrimitive action;
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
};

struct ActionSequence {
  std::vector<ActionStep> steps;

  /// Throws InvalidSequence when empty or when consecutive steps do not chain
  /// within 1e-6 m.
  void validate() const;
};

bool operator==(const ActionSequence& a, const ActionSequence& b);

/// What the kinematic interpretation of a plan needs to know up front.
struct PlanContext {
  Vec3 start = Vec3::Zero();
  Vec3 home = Vec3::Zero();
  double gripper_max_width = 0.085;
};

/// Lays the primitives out along the effector path starting at ctx.start.
ActionSequence chain(const std::vector<ActionPrimitive>& actions, const PlanContext& ctx);

/// One token per line, arguments separated by spaces, shortest round-trip
/// number formatting. Inverse of parse_plan_response.
std::string serialize_plan(const ActionSequence& sequence);

/// Line grammar (uppercase tokens, meters and degrees):
///   MOVETO x y z | PICK i | PLACE i | PLACE x y z | POUR deg i | HOME | DROP
///   | OPENGRIPPER w | CLOSEGRIPPER w
/// Blank lines are ignored; anything else is rejected.
ActionSequence parse_plan_response(std::string_view text, const PlanContext& ctx = {});

// ---- prompt ----------------------------------------------------------------

struct PromptTemplates {
  std::string version;
  std::string action_constraints;
  std::string trajectory_constraints;  // may reference {clearance} and {up_axis}
  std::string example_tasks;

  static PromptTemplates builtin();
  /// Reads action_constraints.txt, trajectory_constraints.txt and
  /// example_tasks.txt from `dir`; version comes from VERSION.
  static PromptTemplates load(const std::filesystem::path& dir);
};

struct PromptBundle {
  std::string action_constraints;
  std::string trajectory_constraints;
  std::string example_tasks;
  std::string scene_digest;
  std::string task;

  std::string system_text() const;
  std::string user_text() const;
  std::string render() const;
};

struct PlannerConfig {
  double clearance = 0.05;
  double default_travel_height = 0.25;
  double place_gap = 0.002;
  Vec3 home_position{0.0, 0.0, 0.5};
  Vec3 handover_position{0.0, 0.45, 0.35};
  Vec3 gripper_half_extents{0.02, 0.02, 0.02};
  AxisConvention axes;
};

PromptBundle build_prompt(const Scene& scene, const Intention& intention,
                          const PlannerConfig& config = {},
                          const PromptTemplates& templates = PromptTemplates::builtin());

// ---- planners --------------------------------------------------------------

struct PlannerFeedback {
  enum class Verdict { Ok, Collision, Rejected };
  Verdict verdict = Verdict::Ok;
  std::optional<Vec3> location;
  std::optional<int> step;
  std::optional<int> obstacle;
  /// Parser message when the previous response was rejected.
  std::string detail;

  /// "collision at (x, y, z) during step k" and friends.
  std::string to_text() const;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual ActionSequence plan(const Intention& intention, const Scene& scene,
                              const std::optional<PlannerFeedback>& feedback) = 0;
  virtual std::string name() const = 0;
};

/// Lifts over every non-manipulated object: transport height is the highest
/// object top plus clearance plus the carried box's half height.
class DeterministicPlanner : public Planner {
 public:
  explicit DeterministicPlanner(PlannerConfig config = {}) : config_(std::move(config)) {}

  ActionSequence plan(const Intention& intention, const Scene& scene,
                      const std::optional<PlannerFeedback>& feedback) override;
  std::string name() const override { return "deterministic"; }

  /// Same as plan() but pretending no other object exists.
  ActionSequence plan_ignoring_obstacles(const Intention& intention, const Scene& scene);

  const PlannerConfig& config() const { return config_; }

 private:
  ActionSequence plan_impl(const Intention& intention, const Scene& scene, bool see_obstacles);
  PlannerConfig config_;
};

/// Chat-completion transport: takes the JSON request body, returns the raw
/// response body. Throws PlannerUnavailable on transport failure.
using ChatTransport = std::function<std::string(const nlohmann::json& request)>;

/// Offline stand-in for a chat endpoint: answers with scripted plan texts in
/// order and records every request.
class CannedChatTransport {
 public:
  explicit CannedChatTransport(std::vector<std::string> responses);

  std::string operator()(const nlohmann::json& request);
  const std::vector<nlohmann::json>& requests() const { return *requests_; }

 private:
  std::shared_ptr<std::deque<std::string>> responses_;
  std::shared_ptr<std::vector<nlohmann::json>> requests_;
};

/// Wraps plan text as {"choices":[{"message":{"role":"assistant","content":...}}]}.
std::string chat_completion_response(const std::string& content);

class LlmPlanner : public Planner {
 public:
  LlmPlanner(ChatTransport transport, std::string model, PlannerConfig config = {},
             PromptTemplates templates = PromptTemplates::builtin());

  ActionSequence plan(const Intention& intention, const Scene& scene,
                      const std::optional<PlannerFeedback>& feedback) override;
  std::string name() const override { return "llm:" + model_; }

  /// Request body sent on the most recent call.
  const nlohmann::json& last_request() const { return last_request_; }

 private:
  ChatTransport transport_;
  std::string model_;
  PlannerConfig config_;
  PromptTemplates templates_;
  nlohmann::json messages_ = nlohmann::json::array();
  std::string last_response_;
  nlohmann::json last_request_;
};

}  // namespace hri
