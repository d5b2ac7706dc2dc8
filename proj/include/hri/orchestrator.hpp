#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hri/deixis.hpp"
#include "hri/grammar.hpp"
#include "hri/perception.hpp"
#include "hri/planning.hpp"
#include "hri/safety.hpp"

namespace hri {

/// Wire version stamped on every outgoing message.
inline constexpr int kMessageVersion = 1;

struct LlmSettings {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "gpt-4";
  double timeout_s = 30.0;
  int max_retries = 2;
  /// Name of the environment variable holding the bearer token.
  std::string api_key_env = "HRI_LLM_API_KEY";
};

struct OrchestratorConfig {
  CameraIntrinsics camera = CameraIntrinsics::vga();
  RigidTransform camera_pose;
  PlannerConfig planner;
  PerceptionOptions perception;
  SelectionOptions selection;
  double gripper_max_width = 0.085;
  int max_retries = 3;
  /// "deterministic", "canned" or "llm".
  std::string planner_backend = "deterministic";
  LlmSettings llm;
  std::optional<std::filesystem::path> phrase_table;
  std::optional<std::filesystem::path> prompt_dir;
  std::optional<std::filesystem::path> persist_root;
};

/// Keys mirror the struct; anything missing keeps its default.
OrchestratorConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OrchestratorConfig& config);

/// Moves the scene along a checked sequence. Throws SafetyGateViolation when
/// the scene is not the one the sequence was checked against, and
/// InvalidSequence for Place/Pour/Drop without a held object or a second Pick.
Scene execute(const CheckedSequence& checked, const Scene& scene, const Vec3& home);

/// Executions performed and refused since process start.
struct GateCounters {
  std::uint64_t executed = 0;
  std::uint64_t refused = 0;
};
GateCounters gate_counters();

nlohmann::json to_json(const Intention& intention);
nlohmann::json to_json(const TargetSelection& selection);
nlohmann::json to_json(const ActionSequence& sequence);

/// Milliseconds per pipeline stage for the most recent intention.
struct StageTimings {
  double parse_ms = 0.0;
  double select_ms = 0.0;
  double plan_ms = 0.0;
  double execute_ms = 0.0;
};

struct ExecutionRecord {
  Intention intention;
  int attempts = 0;
  ActionSequence sequence;
};

/// One operator session: the FSM, the simulated scene and the event log.
/// Not thread-safe; the service serializes access per session.
class Session {
 public:
  Session(std::string id, Scene scene, std::unique_ptr<Planner> planner,
          OrchestratorConfig config, PhraseTable phrases = PhraseTable::defaults());

  const std::string& id() const { return id_; }
  const Scene& scene() const { return scene_; }
  const SessionState& state() const { return state_; }
  const std::vector<ExecutionRecord>& executions() const { return executions_; }
  const StageTimings& timings() const { return timings_; }
  int total_attempts() const { return total_attempts_; }

  /// Each returns the messages produced by the event. Errors in the input
  /// become {"type":"error"} messages; StaleEvent is thrown instead because
  /// the event never entered the log.
  std::vector<nlohmann::json> ingest(const VerbalUtterance& utterance);
  std::vector<nlohmann::json> ingest(const SkeletonFrame& skeleton);

  /// Input and output entries in order, one JSON object per entry.
  const std::vector<nlohmann::json>& log() const { return log_; }
  /// Output messages only, in order; `seq` is the position in this list.
  const std::vector<nlohmann::json>& messages() const { return messages_; }

  nlohmann::json state_json() const;

  /// Writes the log and scene snapshots under `dir` from now on.
  void persist_to(const std::filesystem::path& dir);

 private:
  std::vector<nlohmann::json> handle_utterance(const VerbalUtterance& u);
  std::vector<nlohmann::json> handle_skeleton(const SkeletonFrame& s);
  void run_intention(const Intention& intention, double t, std::vector<nlohmann::json>& out);
  void check_order(double t);
  void emit(std::vector<nlohmann::json>& out, double t, const std::string& type,
            nlohmann::json body);
  void record(nlohmann::json entry);
  void snapshot(const std::string& name) const;

  std::string id_;
  Scene scene_;
  std::unique_ptr<Planner> planner_;
  OrchestratorConfig config_;
  PhraseTable phrases_;
  SessionState state_;
  std::optional<double> last_t_;
  std::vector<nlohmann::json> log_;
  std::vector<nlohmann::json> messages_;
  std::vector<ExecutionRecord> executions_;
  std::optional<nlohmann::json> last_check_;
  std::optional<nlohmann::json> last_trajectory_;
  StageTimings timings_;
  int total_attempts_ = 0;
  std::optional<std::filesystem::path> persist_dir_;
};

/// Feeds the input entries of a session log into `session` in order.
void replay_log(Session& session, const std::vector<nlohmann::json>& log);
std::vector<nlohmann::json> read_log_file(const std::filesystem::path& path);

/// Input event JSON -> typed event. {t, kind:"utterance", text} or
/// {t, kind:"skeleton", joints:{name:[x,y,z]}}.
std::variant<VerbalUtterance, SkeletonFrame> event_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VerbalUtterance& u);
nlohmann::json to_json(const SkeletonFrame& s);

// ---- scenarios -------------------------------------------------------------

struct RegionAssertion {
  int box_id = 0;
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  std::optional<double> pour_angle_deg;
};

struct Scenario {
  std::string name;
  WorldSpec world;
  /// Overrides applied on top of the default config.
  nlohmann::json config = nlohmann::json::object();
  std::string planner = "deterministic";
  std::vector<std::string> canned_responses;
  /// Raw events; "point_at" entries are resolved against the perceived scene.
  std::vector<nlohmann::json> events;
  std::vector<RegionAssertion> expected;
};

Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);

/// Operator elbow used when resolving "point_at" events.
inline const Vec3 kOperatorElbow{0.0, 0.55, 0.35};

/// Skeleton whose forearm points from the operator elbow at `target`.
SkeletonFrame pointing_skeleton(const Vec3& target, double t);

struct ReplayReport {
  /// Everything except timings; identical across runs of the same file.
  nlohmann::json canonical;
  nlohmann::json timings;
  bool passed = false;

  /// canonical plus timings under "timings".
  nlohmann::json full() const;
};

/// Builds a planner for a backend name. The "llm" backend needs a transport
/// supplied by the caller.
using TransportFactory = std::function<ChatTransport(const LlmSettings&)>;
std::unique_ptr<Planner> make_planner(const OrchestratorConfig& config,
                                      const std::vector<std::string>& canned = {},
                                      const TransportFactory& transport = {});

/// Scene from the synthetic render of the world plus the box id behind each
/// object index.
struct PerceivedScene {
  Scene scene;
  std::map<int, int> box_of_index;
  std::map<int, int> index_of_box;
};
PerceivedScene perceive_scene(const WorldSpec& world, const OrchestratorConfig& config);

ReplayReport replay(const Scenario& scenario, const TransportFactory& transport = {},
                    const std::optional<std::filesystem::path>& persist_dir = std::nullopt);

}  // namespace hri
