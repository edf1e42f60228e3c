#include "kern/analysis.hpp"
#include "kern/trace_io.hpp"

#include "support/corpus.hpp"
#include "support/example_traces.hpp"
#include "support/oracles.hpp"
#include "support/random_trace.hpp"

#include <gtest/gtest.h>

using namespace kern;
using namespace kern::testing;

namespace {

std::map<Pid, std::vector<Tag>> races(std::initializer_list<std::pair<const Pid, std::vector<Tag>>> l) { return l; }

Trace recorded_fig1b(const std::string& prog_name) {
    SchedulerConfig cfg;
    cfg.policy = policy::Scripted{read_schedule_json(read_text_file(corpus_path("fig1b.sched")))};
    return run(load_corpus(prog_name), "main", cfg).trace;
}

std::vector<EventRef> receives(const Trace& t) {
    std::vector<EventRef> out;
    for (const auto& r : t.refs()) {
        if (std::holds_alternative<act::Rec>(t.at(r))) out.push_back(r);
    }
    return out;
}

}  // namespace

TEST(Symptoms, ExampleTraces) {
    Symptoms expected;
    expected.blocked = {Pid{2}};
    expected.orphan = {Tag{2}, Tag{3}};
    EXPECT_EQ(symptoms(trace_star()), expected);
    EXPECT_EQ(symptoms(trace_fig1c()), expected);
}

TEST(Symptoms, LostMessage) {
    Trace t;
    t.seq[Pid{1}] = {spawn(2), send(1, 2), exit_()};
    t.seq[Pid{2}] = {exit_()};
    const auto s = symptoms(t);
    EXPECT_EQ(s.lost, std::set<Tag>{Tag{1}});
    EXPECT_TRUE(s.blocked.empty());
    EXPECT_TRUE(s.orphan.empty());
    EXPECT_TRUE(exhibits(s, SymptomKind::Lost));
    EXPECT_FALSE(exhibits(s, SymptomKind::Deadlock));
}

TEST(RaceSet, ExampleTraces) {
    const auto star = race_set(trace_star(), {Pid{2}, 1});
    EXPECT_EQ(star.consumed, Tag{1});
    EXPECT_EQ(star.races, races({{Pid{3}, {Tag{2}, Tag{3}}}}));
    EXPECT_EQ(star.tags(), (std::vector<Tag>{Tag{2}, Tag{3}}));

    // l2 is delivered before l1 here, so only l3 races.
    const auto c = race_set(trace_fig1c(), {Pid{2}, 2});
    EXPECT_EQ(c.races, races({{Pid{3}, {Tag{3}}}}));

    EXPECT_THROW(race_set(trace_star(), {Pid{2}, 0}), std::invalid_argument);
}

TEST(RaceSet, AllRaceSetsSkipsEmpty) {
    const auto all = all_race_sets(trace_star());
    ASSERT_EQ(all.size(), 1u);
    EXPECT_EQ(all.begin()->first, (EventRef{Pid{2}, 1}));
}

TEST(RaceSet, MatchesOracleOnRandomTraces) {
    std::size_t checked = 0, nonempty = 0;
    for (std::uint64_t seed = 0; seed < 3000; ++seed) {
        const auto t = trace_from_events(random_events(seed));
        const HappenedBefore hb(t);
        for (const auto& r : receives(t)) {
            const auto rs = race_set(t, hb, r);
            ASSERT_EQ(rs.races, oracle_race_set(t, r)) << "seed " << seed << " at " << to_string(r);
            ++checked;
            if (!rs.empty()) ++nonempty;
        }
    }
    EXPECT_GT(checked, 1000u);
    EXPECT_GT(nonempty, 100u);
}

TEST(RaceSet, CorpusRunsMatchOracle) {
    for (const auto& name : terminating_corpus()) {
        const auto prog = load_corpus(name);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            SchedulerConfig cfg;
            cfg.policy = policy::Random{seed};
            const auto t = run(prog, "main", cfg).trace;
            for (const auto& r : receives(t)) {
                EXPECT_EQ(race_set(t, r).races, oracle_race_set(t, r)) << name << " seed " << seed;
            }
        }
    }
}

TEST(Variant, ExampleLogForL2) {
    Log expected;
    expected.seq[Pid{1}] = {logact::Spawn{Pid{2}}, logact::Spawn{Pid{3}}, logact::Send{Tag{1}}};
    expected.seq[Pid{2}] = {logact::Rec{Tag{2}}};
    expected.seq[Pid{3}] = {logact::Send{Tag{2}}, logact::Send{Tag{3}}};
    EXPECT_EQ(race_variant(trace_star(), {Pid{2}, 1}, Tag{2}), expected);
    EXPECT_THROW(race_variant(trace_star(), {Pid{2}, 1}, Tag{1}), std::invalid_argument);
}

TEST(Variant, MatchesOracleOnRandomTraces) {
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const auto t = trace_from_events(random_events(seed));
        const HappenedBefore hb(t);
        for (const auto& r : receives(t)) {
            for (const auto& alt : race_set(t, hb, r).tags()) {
                ASSERT_TRUE(log_equal(race_variant(t, r, alt), oracle_variant(t, r, alt)))
                    << "seed " << seed << " at " << to_string(r) << " with " << alt.str();
                ++checked;
            }
        }
    }
    EXPECT_GT(checked, 100u);
}

TEST(Explore, FromRecordedRunFindsTheFeasibleVariant) {
    const auto prog = load_corpus("fig1.kern");
    const auto first = recorded_fig1b("fig1.kern");
    ExploreConfig cfg;
    cfg.max_depth = 1;
    const auto report = explore_from(prog, "main", first, StopReason::Completed, cfg);

    ASSERT_EQ(report.infeasible.size(), 1u);
    EXPECT_EQ(report.infeasible[0].tag, Tag{2});
    EXPECT_EQ(report.infeasible[0].receive, (EventRef{Pid{2}, 1}));
    EXPECT_NE(report.infeasible[0].problem.find("StuckAtReceive(p2, l2)"), std::string::npos);

    ASSERT_GE(report.explored.size(), 2u);
    const auto& v = report.explored[1];
    EXPECT_EQ(v.parent, 0u);
    EXPECT_EQ(v.tag, Tag{3});
    EXPECT_EQ(v.depth, 1u);
    const auto& p2 = v.log.seq.at(Pid{2});
    ASSERT_FALSE(p2.empty());
    EXPECT_EQ(p2.front(), (LogAction{logact::Rec{Tag{3}}}));
}

TEST(Explore, FindsOrphanInTheStuckExample) {
    ExploreConfig cfg;
    cfg.targets = {SymptomKind::Orphan};
    const auto report = explore(load_corpus("fig1_star.kern"), "main", cfg);
    ASSERT_TRUE(report.witnesses.contains(SymptomKind::Orphan));
    const auto& w = report.explored.at(report.witnesses.at(SymptomKind::Orphan));
    EXPECT_LE(w.depth, 1u);
    EXPECT_FALSE(w.symptoms.orphan.empty());
}

TEST(Explore, NoWitnessInTheTrivialProgram) {
    ExploreConfig cfg;
    cfg.targets = {SymptomKind::Deadlock};
    const auto report = explore(load_corpus("trivial.kern"), "main", cfg);
    EXPECT_TRUE(report.witnesses.empty());
    EXPECT_TRUE(report.frontier_exhausted);
    EXPECT_EQ(report.explored.size(), 1u);
}

TEST(Explore, RunsAreDistinct) {
    ExploreConfig cfg;
    cfg.max_depth = 3;
    cfg.seed = 7;
    const auto report = explore(load_corpus("selective.kern"), "main", cfg);
    for (std::size_t i = 0; i < report.explored.size(); ++i) {
        for (std::size_t j = i + 1; j < report.explored.size(); ++j) {
            EXPECT_FALSE(log_equal(report.explored[i].log, report.explored[j].log)) << i << " vs " << j;
        }
    }
}

TEST(Explore, DelayedMessagesAreRejected) {
    ExploreConfig cfg;
    cfg.include_delayed = true;
    EXPECT_THROW(explore(load_corpus("fig1.kern"), "main", cfg), std::exception);
}
