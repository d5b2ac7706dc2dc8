#include "hri/planning.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hri/error.hpp"
#include "hri/text.hpp"

namespace hri {

namespace {

#include "prompt_templates_builtin.inc"

constexpr double kChainTol = 1e-6;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string vec_text(const Vec3& v, int decimals = 4) {
  return "(" + fixed(v.x(), decimals) + ", " + fixed(v.y(), decimals) + ", " +
         fixed(v.z(), decimals) + ")";
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Plain decimal: -?(d+(.d*)?|.d+)([eE][+-]?d+)?
bool is_decimal(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && s[i] == '-') ++i;
  std::size_t digits = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  }
  if (digits == 0) return false;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t exp_digits = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++exp_digits;
    if (exp_digits == 0) return false;
  }
  return i == s.size();
}

}  // namespace

// ---- primitives ------------------------------------------------------------

bool operator==(const ActionPrimitive& a, const ActionPrimitive& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      overloaded{
          [&](const MoveTo& x) { return x.position == std::get<MoveTo>(b).position; },
          [&](const Pick& x) { return x.object == std::get<Pick>(b).object; },
          [&](const Place& x) {
            const auto& y = std::get<Place>(b);
            if (x.target.index() != y.target.index()) return false;
            if (const auto* i = std::get_if<int>(&x.target)) return *i == std::get<int>(y.target);
            return std::get<Vec3>(x.target) == std::get<Vec3>(y.target);
          },
          [&](const Pour& x) {
            const auto& y = std::get<Pour>(b);
            return x.angle_deg == y.angle_deg && x.over == y.over;
          },
          [](const Home&) { return true; },
          [](const Drop&) { return true; },
          [&](const OpenGripper& x) { return x.width == std::get<OpenGripper>(b).width; },
          [&](const CloseGripper& x) { return x.width == std::get<CloseGripper>(b).width; },
      },
      a);
}

bool operator==(const ActionSequence& a, const ActionSequence& b) {
  if (a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto& x = a.steps[i];
    const auto& y = b.steps[i];
    if (!(x.action == y.action) || x.start != y.start || x.end != y.end) return false;
  }
  return true;
}

void ActionSequence::validate() const {
  if (steps.empty()) throw Error(ErrorKind::InvalidSequence, "action sequence is empty");
  for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
    if ((steps[k].end - steps[k + 1].start).norm() > kChainTol) {
      throw Error(ErrorKind::InvalidSequence,
                  "step " + std::to_string(k + 1) + " does not start where step " +
                      std::to_string(k) + " ends");
    }
  }
}

ActionSequence chain(const std::vector<ActionPrimitive>& actions, const PlanContext& ctx) {
  ActionSequence seq;
  Vec3 cur = ctx.start;
  for (const auto& a : actions) {
    ActionStep step{a, cur, cur};
    std::visit(overloaded{
                   [&](const MoveTo& m) { step.end = m.position; },
                   [&](const Home&) { step.end = ctx.home; },
                   [&](const Place& p) {
                     if (const auto* pose = std::get_if<Vec3>(&p.target)) step.end = *pose;
                   },
                   [](const auto&) {},
               },
               a);
    cur = step.end;
    seq.steps.push_back(std::move(step));
  }
  return seq;
}

std::string serialize_plan(const ActionSequence& sequence) {
  std::string out;
  auto vec = [](const Vec3& v) {
    return shortest(v.x()) + " " + shortest(v.y()) + " " + shortest(v.z());
  };
  for (const auto& step : sequence.steps) {
    out += std::visit(
        overloaded{
            [&](const MoveTo& m) { return "MOVETO " + vec(m.position); },
            [](const Pick& p) { return "PICK " + std::to_string(p.object); },
            [&](const Place& p) {
              if (const auto* i = std::get_if<int>(&p.target)) return "PLACE " + std::to_string(*i);
              return "PLACE " + vec(std::get<Vec3>(p.target));
            },
            [](const Pour& p) {
              return "POUR " + shortest(p.angle_deg) + " " + std::to_string(p.over);
            },
            [](const Home&) { return std::string("HOME"); },
            [](const Drop&) { return std::string("DROP"); },
            [](const OpenGripper& g) { return "OPENGRIPPER " + shortest(g.width); },
            [](const CloseGripper& g) { return "CLOSEGRIPPER " + shortest(g.width); },
        },
        step.action);
    out += '\n';
  }
  return out;
}

ActionSequence parse_plan_response(std::string_view text, const PlanContext& ctx) {
  std::vector<ActionPrimitive> actions;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      if (i > start) words.push_back(line.substr(start, i - start));
    }
    if (words.empty()) continue;

    const std::string where = "line " + std::to_string(line_no);
    const std::string_view token = words[0];
    const std::size_t argc = words.size() - 1;

    auto number = [&](std::size_t k) {
      const auto w = words[k];
      auto v = is_decimal(w) ? parse_double(w) : std::nullopt;
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorKind::InvalidArgument,
                    where + ": '" + std::string(w) + "' is not a number");
      }
      return *v;
    };
    auto index = [&](std::size_t k) {
      const auto w = words[k];
      const bool digits = !w.empty() && std::all_of(w.begin(), w.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c));
      });
      auto v = digits ? parse_int(w) : std::nullopt;
      if (!v || *v > 1'000'000) {
        throw Error(ErrorKind::InvalidArgument,
                    where + ": '" + std::string(w) + "' is not an object index");
      }
      return static_cast<int>(*v);
    };
    auto arity = [&](std::size_t n) {
      if (argc != n) {
        throw Error(ErrorKind::InvalidArgument, where + ": " + std::string(token) + " takes " +
                                                    std::to_string(n) + " argument(s)");
      }
    };
    auto width = [&](std::size_t k) {
      const double w = number(k);
      if (w < 0.0 || w > ctx.gripper_max_width) {
        throw Error(ErrorKind::InvalidArgument, where + ": gripper width outside [0, max]");
      }
      return w;
    };

    if (token == "MOVETO") {
      arity(3);
      actions.emplace_back(MoveTo{Vec3(number(1), number(2), number(3))});
    } else if (token == "PICK") {
      arity(1);
      actions.emplace_back(Pick{index(1)});
    } else if (token == "PLACE") {
      if (argc == 1) {
        actions.emplace_back(Place{index(1)});
      } else {
        arity(3);
        actions.emplace_back(Place{Vec3(number(1), number(2), number(3))});
      }
    } else if (token == "POUR") {
      arity(2);
      const double angle = number(1);
      if (angle < 0.0 || angle > 180.0) {
        throw Error(ErrorKind::InvalidArgument, where + ": pour angle outside [0, 180]");
      }
      actions.emplace_back(Pour{angle, index(2)});
    } else if (token == "HOME") {
      arity(0);
      actions.emplace_back(Home{});
    } else if (token == "DROP") {
      arity(0);
      actions.emplace_back(Drop{});
    } else if (token == "OPENGRIPPER") {
      arity(1);
      actions.emplace_back(OpenGripper{width(1)});
    } else if (token == "CLOSEGRIPPER") {
      arity(1);
      actions.emplace_back(CloseGripper{width(1)});
    } else {
      throw Error(ErrorKind::InvalidToken, where + ": unknown token '" + std::string(token) + "'");
    }
  }
  if (actions.empty()) throw Error(ErrorKind::EmptyPlan, "plan has no action lines");
  return chain(actions, ctx);
}

// ---- prompt ----------------------------------------------------------------

PromptTemplates PromptTemplates::builtin() {
  return {std::string(kBuiltinVersion), std::string(kBuiltinActionConstraints),
          std::string(kBuiltinTrajectoryConstraints), std::string(kBuiltinExampleTasks)};
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  PromptTemplates t;
  t.version = read_text(dir / "VERSION");
  t.action_constraints = read_text(dir / "action_constraints.txt");
  t.trajectory_constraints = read_text(dir / "trajectory_constraints.txt");
  t.example_tasks = read_text(dir / "example_tasks.txt");
  while (!t.version.empty() && std::isspace(static_cast<unsigned char>(t.version.back()))) {
    t.version.pop_back();
  }
  return t;
}

std::string PromptBundle::system_text() const {
  return "# Action constraints\n" + action_constraints + "\n# Trajectory constraints\n" +
         trajectory_constraints + "\n# Example tasks\n" + example_tasks;
}

std::string PromptBundle::user_text() const {
  return "# Scene\n" + scene_digest + "\n# Task\n" + task;
}

std::string PromptBundle::render() const { return system_text() + "\n" + user_text(); }

PromptBundle build_prompt(const Scene& scene, const Intention& intention,
                          const PlannerConfig& config, const PromptTemplates& templates) {
  static constexpr std::string_view kAxisNames[] = {"x", "y", "z"};
  PromptBundle b;
  b.action_constraints = templates.action_constraints;
  b.trajectory_constraints = replace_all(templates.trajectory_constraints, "{clearance}",
                                         fixed(config.clearance, 3));
  b.trajectory_constraints = replace_all(b.trajectory_constraints, "{up_axis}",
                                         kAxisNames[config.axes.up_axis]);
  b.trajectory_constraints = replace_all(b.trajectory_constraints, "{gripper_max_width}",
                                         fixed(scene.gripper_max_width, 3));
  b.example_tasks = templates.example_tasks;

  std::string digest;
  auto objects = scene.all_objects();
  std::sort(objects.begin(), objects.end(),
            [](const auto& x, const auto& y) { return x.index < y.index; });
  for (const auto& o : objects) {
    digest += "object " + std::to_string(o.index) + ": w=" + fixed(o.width, 4) +
              " h=" + fixed(o.height, 4) + " d=" + fixed(o.thickness, 4) +
              " centroid=" + vec_text(o.centroid) + " top=" + fixed(config.axes.top(o), 4) +
              (scene.is_interactable(o.index) ? " interactable" : " obstacle") + "\n";
  }
  digest += "effector: position=" + vec_text(scene.effector.position) +
            " gripper_opening=" + fixed(scene.effector.gripper_opening, 4) +
            " held=" + (scene.held ? std::to_string(*scene.held) : std::string("none")) + "\n";
  digest += "home: " + vec_text(config.home_position) + "\n";
  digest += "handover: " + vec_text(config.handover_position) + "\n";
  b.scene_digest = digest;
  b.task = "Intention " + intention.to_tuple_string() + "\n";
  if (intention.a1 == Verb::Pour || intention.a2 == Verb::Pour) {
    b.task += "Pour angle: " + shortest(intention.pour_angle_deg()) + " degrees\n";
  }
  return b;
}

// ---- feedback --------------------------------------------------------------

std::string PlannerFeedback::to_text() const {
  switch (verdict) {
    case Verdict::Ok:
      return "trajectory is collision-free";
    case Verdict::Collision: {
      std::string s = "collision at " + (location ? vec_text(*location) : std::string("(?)")) +
                      " during step " + (step ? std::to_string(*step) : std::string("?"));
      if (obstacle) s += " with object " + std::to_string(*obstacle);
      return s + ". Generate a new action sequence that avoids it.";
    }
    case Verdict::Rejected:
      return "response rejected: " + detail + ". Answer with action tokens only.";
  }
  return {};
}

// ---- deterministic planner -------------------------------------------------

ActionSequence DeterministicPlanner::plan(const Intention& intention, const Scene& scene,
                                          const std::optional<PlannerFeedback>&) {
  return plan_impl(intention, scene, true);
}

ActionSequence DeterministicPlanner::plan_ignoring_obstacles(const Intention& intention,
                                                             const Scene& scene) {
  return plan_impl(intention, scene, false);
}

ActionSequence DeterministicPlanner::plan_impl(const Intention& intention, const Scene& scene,
                                               bool see_obstacles) {
  intention.validate();
  const auto& axes = config_.axes;
  const int up = axes.up_axis;

  auto object = [&](int index) -> const StructuralObject& {
    const auto* o = scene.find(index);
    if (!o) throw Error(ErrorKind::UnknownTarget, "object " + std::to_string(index) + " not in scene");
    return *o;
  };

  // Which object ends up in the gripper, if any.
  std::optional<int> manipulated = scene.held;
  if (!manipulated && intention.a1 == Verb::Pick) manipulated = intention.t1;
  if (intention.a1 == Verb::Pick) {
    const auto& target = object(*intention.t1);
    if (!scene.is_interactable(target.index) || target.width > scene.gripper_max_width) {
      throw Error(ErrorKind::Ungraspable,
                  "object " + std::to_string(target.index) + " is wider than the gripper");
    }
    if (scene.held) {
      throw Error(ErrorKind::UnsupportedIntention, "gripper already holds an object");
    }
  }
  for (const auto& t : {intention.t1, intention.t2}) {
    if (t) object(*t);
  }

  const bool pours = intention.a1 == Verb::Pour || intention.a2 == Verb::Pour;
  Vec3 held_half = Vec3::Zero();
  double held_radius = 0.0;
  if (manipulated) {
    held_half = 0.5 * axes.extents_xyz(object(*manipulated));
    held_radius = held_half.norm();
  }
  double moving_half_up = config_.gripper_half_extents[up];
  if (manipulated) moving_half_up = std::max(moving_half_up, pours ? held_radius : held_half[up]);

  double travel = config_.default_travel_height;
  if (see_obstacles) {
    for (const auto& o : scene.all_objects()) {
      if (manipulated && o.index == *manipulated) continue;
      travel = std::max(travel, axes.top(o) + config_.clearance + moving_half_up);
    }
  }

  std::vector<ActionPrimitive> actions;
  Vec3 cur = scene.effector.position;
  std::optional<int> holding = scene.held;

  auto move = [&](const Vec3& p) {
    if ((p - cur).norm() > 1e-12) actions.emplace_back(MoveTo{p});
    cur = p;
  };
  auto at_travel = [&](Vec3 p) {
    p[up] = travel;
    return p;
  };
  // Rise (or sink) to transport height, cross, then arrive above `xy`.
  auto travel_over = [&](const Vec3& xy) {
    move(at_travel(cur));
    move(at_travel(xy));
  };
  auto need_held = [&](Verb v) {
    if (!holding) {
      throw Error(ErrorKind::UnsupportedIntention,
                  std::string(to_string(v)) + " needs an object in the gripper");
    }
  };

  auto perform = [&](Verb verb, const std::optional<int>& target, bool compound) {
    switch (verb) {
      case Verb::Home:
        if (compound || holding) {
          travel_over(config_.home_position);
        }
        actions.emplace_back(Home{});
        cur = config_.home_position;
        break;
      case Verb::Move:
        move(at_travel(cur));
        if (actions.empty()) actions.emplace_back(MoveTo{cur});
        break;
      case Verb::Drop:
      case Verb::Throw:
        need_held(verb);
        actions.emplace_back(Drop{});
        holding.reset();
        break;
      case Verb::Pick: {
        if (holding) throw Error(ErrorKind::UnsupportedIntention, "gripper already holds an object");
        const auto& obj = object(*target);
        if (!scene.is_interactable(obj.index)) {
          throw Error(ErrorKind::Ungraspable, "object " + std::to_string(obj.index) + " is not graspable");
        }
        actions.emplace_back(OpenGripper{scene.gripper_max_width});
        travel_over(obj.centroid);
        move(obj.centroid);
        actions.emplace_back(CloseGripper{obj.width});
        actions.emplace_back(Pick{obj.index});
        holding = obj.index;
        move(at_travel(cur));
        break;
      }
      case Verb::Place: {
        need_held(verb);
        const auto& dst = object(*target);
        travel_over(dst.centroid);
        Vec3 rest = dst.centroid;
        rest[up] = axes.top(dst) + held_half[up] + config_.place_gap;
        move(rest);
        actions.emplace_back(Place{dst.index});
        holding.reset();
        move(at_travel(cur));
        break;
      }
      case Verb::Pour: {
        need_held(verb);
        const double angle = intention.pour_angle_deg();
        if (angle < 0.0 || angle > 180.0) {
          throw Error(ErrorKind::InvalidArgument, "pour angle outside [0, 180]");
        }
        const auto& dst = object(*target);
        travel_over(dst.centroid);
        Vec3 spout = dst.centroid;
        spout[up] = std::min(travel, axes.top(dst) + config_.clearance + held_radius);
        move(spout);
        actions.emplace_back(Pour{angle, dst.index});
        move(at_travel(cur));
        break;
      }
      case Verb::Give: {
        need_held(verb);
        travel_over(config_.handover_position);
        actions.emplace_back(Place{config_.handover_position});
        cur = config_.handover_position;
        holding.reset();
        move(at_travel(cur));
        break;
      }
    }
  };

  perform(intention.a1, intention.t1, intention.a2.has_value());
  if (intention.a2) perform(*intention.a2, intention.t2, true);

  if (actions.empty()) actions.emplace_back(MoveTo{cur});
  return chain(actions, PlanContext{scene.effector.position, config_.home_position,
                                    scene.gripper_max_width});
}

// ---- chat-completion planner ----------------------------------------------

CannedChatTransport::CannedChatTransport(std::vector<std::string> responses)
    : responses_(std::make_shared<std::deque<std::string>>(responses.begin(), responses.end())),
      requests_(std::make_shared<std::vector<nlohmann::json>>()) {}

std::string CannedChatTransport::operator()(const nlohmann::json& request) {
  requests_->push_back(request);
  if (responses_->empty()) {
    throw Error(ErrorKind::PlannerUnavailable, "canned transport has no responses left");
  }
  std::string content = std::move(responses_->front());
  responses_->pop_front();
  return chat_completion_response(content);
}

std::string chat_completion_response(const std::string& content) {
  return nlohmann::json{
      {"choices",
       nlohmann::json::array(
           {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}})}}
      .dump();
}

LlmPlanner::LlmPlanner(ChatTransport transport, std::string model, PlannerConfig config,
                       PromptTemplates templates)
    : transport_(std::move(transport)), model_(std::move(model)), config_(std::move(config)),
      templates_(std::move(templates)) {}

ActionSequence LlmPlanner::plan(const Intention& intention, const Scene& scene,
                                const std::optional<PlannerFeedback>& feedback) {
  if (!feedback || messages_.empty()) {
    const PromptBundle prompt = build_prompt(scene, intention, config_, templates_);
    messages_ = nlohmann::json::array({{{"role", "system"}, {"content", prompt.system_text()}},
                                       {{"role", "user"}, {"content", prompt.user_text()}}});
  } else {
    messages_.push_back({{"role", "assistant"}, {"content", last_response_}});
    messages_.push_back({{"role", "user"}, {"content", feedback->to_text()}});
  }
  last_request_ = {{"model", model_}, {"messages", messages_}, {"temperature", 0}};

  std::string body;
  try {
    body = transport_(last_request_);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::PlannerUnavailable, e.what());
  }

  try {
    const auto j = nlohmann::json::parse(body);
    last_response_ = j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::PlannerUnavailable, std::string("malformed chat response: ") + e.what());
  }

  const PlanContext ctx{scene.effector.position, config_.home_position, scene.gripper_max_width};
  ActionSequence seq = parse_plan_response(last_response_, ctx);
  for (const auto& step : seq.steps) {
    std::optional<int> ref;
    if (const auto* p = std::get_if<Pick>(&step.action)) ref = p->object;
    if (const auto* p = std::get_if<Pour>(&step.action)) ref = p->over;
    if (const auto* p = std::get_if<Place>(&step.action)) {
      if (const auto* i = std::get_if<int>(&p->target)) ref = *i;
    }
    if (ref && !scene.find(*ref)) {
      throw Error(ErrorKind::UnknownTarget, "plan references unknown object " + std::to_string(*ref));
    }
  }
  return seq;
}

}  // namespace hri
