#include <doctest.h>

#include "hri/error.hpp"
#include "hri/grammar.hpp"
#include "hri/testkit.hpp"

using namespace hri;

namespace {

Command parse(const std::string& text) { return parse_utterance(VerbalUtterance{text, 0.0, std::nullopt}); }

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidInput;
}

TargetSelection pointed(int index) {
  TargetSelection s;
  s.index = index;
  return s;
}

SessionState feed(std::vector<FsmEvent> events) {
  SessionState s;
  for (const auto& e : events) s = hri::advance(s, e);
  return s;
}

Command action(Verb v) { return ActionCommand{v, verb_requires_target(v)}; }
const Command kApprove = ApprovalCommand{};
const Command kFinish = FinishCommand{};

}  // namespace

TEST_CASE("parse_utterance: phrase examples") {
  CHECK(parse("pick up this exotic fruit") == Command{ActionCommand{Verb::Pick, true}});
  CHECK(parse("move to the initial position") == Command{ActionCommand{Verb::Home, false}});
  CHECK(parse("pour at ninety degrees") == Command{MetricCommand{{MetricKind::Angle, 90.0}}});
  CHECK(parse("tilt it 45 degrees") == Command{MetricCommand{{MetricKind::Angle, 45.0}}});
  CHECK(parse("give it to me") == Command{ActionCommand{Verb::Give, false}});
  CHECK(parse("put it there") == Command{ActionCommand{Verb::Place, true}});
  CHECK(parse("yes") == kApprove);
  CHECK(parse("This one.") == kApprove);
  CHECK(parse("finish") == kFinish);
  CHECK(parse("done") == kFinish);
  CHECK(kind_of([] { parse("blargh"); }) == ErrorKind::UnrecognizedUtterance);
  CHECK(kind_of([] { parse("   "); }) == ErrorKind::InvalidInput);
}

TEST_CASE("parse_number_words") {
  CHECK(parse_number_words({"ninety"}) == 90.0);
  CHECK(parse_number_words({"forty", "five"}) == 45.0);
  CHECK(parse_number_words({"zero", "point", "five"}) == 0.5);
  CHECK(parse_number_words({"one", "hundred", "twenty"}) == 120.0);
  CHECK_FALSE(parse_number_words({"banana"}).has_value());
}

TEST_CASE("parse_utterance is deterministic") {
  for (const char* t : {"pick up this", "pour at ninety degrees", "that one", "move slowly at 0.1 meters per second"}) {
    std::string first;
    for (int i = 0; i < 5; ++i) {
      try {
        const std::string d = describe(parse(t));
        if (i == 0) first = d;
        CHECK(d == first);
      } catch (const Error& e) {
        if (i == 0) first = e.what();
        CHECK(std::string(e.what()) == first);
      }
    }
  }
}

TEST_CASE("phrase table json round trip") {
  const PhraseTable t = PhraseTable::from_json(PhraseTable::defaults().to_json());
  CHECK(describe(t.parse({"pick up this", 0.0, std::nullopt})) == describe(parse("pick up this")));
  CHECK(t.to_json() == PhraseTable::defaults().to_json());
}

TEST_CASE("advance: single pick") {
  const SessionState s = feed({action(Verb::Pick), pointed(3), kApprove, kFinish});
  REQUIRE(s.complete());
  CHECK(fuse(s) == Intention{Verb::Pick, 3, {}, {}, {}});
}

TEST_CASE("advance: protocol errors") {
  CHECK(kind_of([] { feed({kApprove}); }) == ErrorKind::ProtocolViolation);
  CHECK(kind_of([] { feed({kFinish}); }) == ErrorKind::IncompleteIntention);
  CHECK(kind_of([] { feed({action(Verb::Pick), kFinish}); }) == ErrorKind::IncompleteIntention);
  CHECK(kind_of([] {
          feed({action(Verb::Pick), pointed(1), kApprove, action(Verb::Place), pointed(2), kApprove,
                action(Verb::Drop)});
        }) == ErrorKind::TooManyActions);
  CHECK(kind_of([] { fuse(SessionState{}); }) == ErrorKind::ProtocolViolation);
}

TEST_CASE("advance: approval without a pointed target is refused") {
  SessionState s = feed({action(Verb::Pick)});
  CHECK_THROWS_AS(hri::advance(s, kApprove), Error);
}

TEST_CASE("advance: the latched target is frozen at approval") {
  const SessionState s = feed({action(Verb::Pick), pointed(1), kApprove, pointed(4), kFinish});
  CHECK(fuse(s).t1 == 1);
}

TEST_CASE("fuse: tuples") {
  CHECK(fuse(feed({action(Verb::Home), kFinish})).to_tuple_string() == "(home, -, -, -, -)");
  const Intention pour = fuse(feed({action(Verb::Pick), pointed(0), kApprove, action(Verb::Pour), pointed(5),
                                    kApprove, MetricCommand{{MetricKind::Angle, 90.0}}, kFinish}));
  CHECK(pour == Intention{Verb::Pick, 0, Verb::Pour, 5, Metric{MetricKind::Angle, 90.0}});
  CHECK(pour.to_tuple_string() == "(pick, 0, pour, 5, angle=90deg)");
  const Intention put = fuse(feed({action(Verb::Pick), pointed(1), kApprove, action(Verb::Place), pointed(2),
                                   kApprove, kFinish}));
  CHECK(put == Intention{Verb::Pick, 1, Verb::Place, 2, {}});
}

TEST_CASE("Intention defaults and validation") {
  CHECK(Intention{Verb::Pick, 1, Verb::Pour, 2, {}}.pour_angle_deg() == 90.0);
  CHECK(kind_of([] { Intention{Verb::Pick, {}, {}, {}, {}}.validate(); }) == ErrorKind::IncompleteIntention);
}

TEST_CASE("canonical script round trip") {
  testkit::Rng rng(4);
  const std::vector<Verb> verbs{Verb::Home, Verb::Drop, Verb::Move, Verb::Pick,
                                Verb::Place, Verb::Pour, Verb::Throw, Verb::Give};
  for (int i = 0; i < 300; ++i) {
    Intention in;
    in.a1 = verbs[static_cast<std::size_t>(rng.integer(0, 7))];
    if (verb_requires_target(in.a1)) in.t1 = rng.integer(0, 9);
    if (rng.chance(0.5)) {
      in.a2 = verbs[static_cast<std::size_t>(rng.integer(0, 7))];
      if (verb_requires_target(*in.a2)) in.t2 = rng.integer(0, 9);
    }
    if (rng.chance(0.3)) in.lambda = Metric{MetricKind::Angle, static_cast<double>(rng.integer(0, 180))};
    else if (rng.chance(0.2)) in.lambda = Metric{MetricKind::Velocity, 0.25};

    SessionState s;
    for (const auto& step : canonical_script(in)) {
      if (const auto* text = std::get_if<std::string>(&step)) {
        s = hri::advance(s, parse(*text));
      } else {
        s = hri::advance(s, pointed(std::get<int>(step)));
      }
    }
    REQUIRE(s.complete());
    CHECK(fuse(s) == in);
  }
}

TEST_CASE("exhaustive event strings never complete without required targets") {
  // Small alphabet and depth here; the acceptance suite covers length 6.
  std::vector<FsmEvent> alphabet{action(Verb::Home), action(Verb::Pick), action(Verb::Pour), kApprove,
                                 Command{MetricCommand{{MetricKind::Angle, 30.0}}}, kFinish, pointed(0)};
  std::vector<SessionState> frontier{SessionState{}};
  long completes = 0;
  for (int depth = 0; depth < 5; ++depth) {
    std::vector<SessionState> next;
    for (const auto& s : frontier) {
      for (const auto& e : alphabet) {
        SessionState n = s;
        try {
          n = hri::advance(s, e);
        } catch (const Error&) {
        }
        if (n.complete()) {
          ++completes;
          const Intention& in = std::get<phase::Complete>(n.phase).intention;
          CHECK((!verb_requires_target(in.a1) || in.t1.has_value()));
          CHECK((!in.a2 || !verb_requires_target(*in.a2) || in.t2.has_value()));
          CHECK((in.a2.has_value() || !in.t2.has_value()));
        }
        next.push_back(n);
      }
    }
    frontier = std::move(next);
  }
  CHECK(completes > 0);
}
