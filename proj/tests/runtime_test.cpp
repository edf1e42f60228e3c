#include "kern/runtime.hpp"
#include "kern/trace_io.hpp"

#include "support/corpus.hpp"
#include "support/example_traces.hpp"
#include "support/properties.hpp"

#include <gtest/gtest.h>

using namespace kern;
using namespace kern::testing;

namespace {

SchedulerConfig scripted(const std::string& sched_file) {
    SchedulerConfig cfg;
    cfg.policy = policy::Scripted{read_schedule_json(read_text_file(corpus_path(sched_file)))};
    return cfg;
}

SchedulerConfig random_lazy(std::uint64_t seed) {
    SchedulerConfig cfg;
    cfg.policy = policy::Random{seed};
    return cfg;
}

std::string golden(const std::string& name) { return read_text_file(std::string(KERN_GOLDEN_DIR) + "/" + name); }

}  // namespace

TEST(Runtime, InitialSystem) {
    const auto prog = load_corpus("fig1.kern");
    const auto sys = initial_system(prog, "main");
    EXPECT_EQ(sys.pool.size(), 1u);
    EXPECT_TRUE(sys.network.empty());
    EXPECT_EQ(sys.next_pid, 2u);
    EXPECT_EQ(sys.next_tag, 1u);
    EXPECT_THROW(initial_system(prog, "nope"), std::exception);
}

TEST(Runtime, TrivialProgram) {
    const auto r = run(load_corpus("trivial.kern"), "main", SchedulerConfig{});
    EXPECT_EQ(r.stop_reason, StopReason::Completed);
    Trace expected;
    expected.seq[Pid{1}] = {exit_()};
    EXPECT_EQ(r.trace, expected);
    EXPECT_EQ(to_string(r.results.at(Pid{1})), "42");
}

TEST(Runtime, ScriptedScheduleReproducesExampleTrace) {
    const auto r = run(load_corpus("fig1_star.kern"), "main", scripted("fig1b.sched"));
    EXPECT_EQ(r.stop_reason, StopReason::Stuck);
    EXPECT_EQ(r.trace, trace_star());
    EXPECT_EQ(write_trace_json(r.events), golden("fig1_star_1b.trace.json"));
}

TEST(Runtime, SecondScheduleDeliversL2First) {
    const auto r = run(load_corpus("fig1_star.kern"), "main", scripted("fig1c.sched"));
    EXPECT_EQ(r.stop_reason, StopReason::Stuck);
    EXPECT_EQ(r.trace, trace_fig1c());
    EXPECT_EQ(write_trace_json(r.events), golden("fig1_star_1c.trace.json"));
}

TEST(Runtime, InapplicableScriptEntryThrows) {
    SchedulerConfig cfg;
    cfg.policy = policy::Scripted{{choice::Proc{Pid{1}}, choice::Deliver{Pid{1}, Pid{2}}}};
    EXPECT_THROW(run(load_corpus("fig1.kern"), "main", cfg), InapplicableChoice);
}

TEST(Runtime, SeedDeterminesTheRun) {
    const auto prog = load_corpus("fig1.kern");
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = run(prog, "main", random_lazy(seed));
        const auto b = run(prog, "main", random_lazy(seed));
        EXPECT_EQ(a.events, b.events);
        EXPECT_EQ(serialize(a.final_sys), serialize(b.final_sys));
    }
}

TEST(Runtime, RandomSchedulesReachDifferentTraces) {
    const auto prog = load_corpus("fig1.kern");
    std::set<std::string> canonical;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        canonical.insert(write_trace_json(run(prog, "main", random_lazy(seed)).events));
    }
    EXPECT_GT(canonical.size(), 1u);
}

TEST(Runtime, CorpusRunsAreWellFormedAndTerminate) {
    for (const auto& name : terminating_corpus()) {
        const auto prog = load_corpus(name);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            for (auto delivery : {Delivery::Lazy, Delivery::Eager}) {
                auto cfg = random_lazy(seed);
                cfg.delivery = delivery;
                const auto r = run(prog, "main", cfg);
                EXPECT_EQ(r.stop_reason, StopReason::Completed) << name << " seed " << seed;
                EXPECT_TRUE(well_formed(r.trace).empty()) << name << " seed " << seed;
                EXPECT_TRUE(r.crashes.empty()) << name << " seed " << seed;
                EXPECT_EQ(trace_from_events(r.events), r.trace);
            }
        }
    }
}

TEST(Runtime, ProgramResults) {
    const std::map<std::string, std::string> expected{
        {"ping_pong.kern", "done"},   {"pipeline.kern", "69"},        {"fan_in.kern", "30"},
        {"selective.kern", "[5,7,1,2]"}, {"counter.kern", "5"},       {"ring.kern", "6"},
        {"map_workers.kern", "[2,8,2,6]"}, {"fib_workers.kern", "76"}, {"barrier.kern", "released"},
    };
    for (const auto& [name, value] : expected) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto r = run(load_corpus(name), "main", random_lazy(seed));
            EXPECT_EQ(to_string(r.results.at(Pid{1})), value) << name << " seed " << seed;
        }
    }
}

TEST(Runtime, EagerDeliveryFollowsEverySend) {
    auto cfg = random_lazy(3);
    cfg.delivery = Delivery::Eager;
    const auto r = run(load_corpus("counter.kern"), "main", cfg);
    for (std::size_t i = 0; i < r.events.size(); ++i) {
        if (auto s = std::get_if<act::Send>(&r.events[i].action)) {
            ASSERT_LT(i + 1, r.events.size());
            EXPECT_EQ(r.events[i + 1], (Event{s->to, act::Deliver{s->tag}}));
        }
    }
}

TEST(Runtime, BudgetStopsTheRun) {
    const auto r = run(load_corpus("ring.kern"), "main", SchedulerConfig{}, 5);
    EXPECT_EQ(r.stop_reason, StopReason::Budget);
    EXPECT_EQ(r.transitions.size(), 5u);
}

TEST(Runtime, StepIsPure) {
    const auto prog = load_corpus("fig1.kern");
    const auto sys = initial_system(prog, "main");
    const auto before = serialize(sys);
    const auto out = step(prog, sys, choice::Proc{Pid{1}});
    EXPECT_EQ(serialize(sys), before);
    EXPECT_NE(serialize(out.sys), before);
    EXPECT_THROW(step(prog, sys, choice::Deliver{Pid{1}, Pid{2}}), InapplicableChoice);
}

TEST(Runtime, EnabledListsProcsThenDeliveries) {
    const auto prog = load_corpus("fig1_star.kern");
    System sys = initial_system(prog, "main");
    for (int i = 0; i < 30; ++i) {
        const auto en = enabled(sys);
        if (en.empty()) break;
        bool seen_deliver = false;
        for (const auto& c : en) {
            if (std::holds_alternative<choice::Deliver>(c)) seen_deliver = true;
            else EXPECT_FALSE(seen_deliver);
        }
        apply(prog, sys, en.back());
    }
}

TEST(Runtime, LostMessageToExitedProcess) {
    const auto prog = parse_program("main() -> P = spawn(quiet, []), P ! hi, ok.\nquiet() -> ok.");
    // Run p2 to exit before anything is delivered.
    SchedulerConfig cfg;
    cfg.policy = policy::Scripted{{choice::Proc{Pid{1}}, choice::Proc{Pid{2}}, choice::Proc{Pid{1}}}};
    const auto r = run(prog, "main", cfg);
    EXPECT_EQ(r.stop_reason, StopReason::Completed);
    const auto idx = index_tags(r.trace);
    ASSERT_EQ(idx.size(), 1u);
    EXPECT_FALSE(idx.begin()->second.deliver);
}

TEST(Schedule, JsonRoundTrip) {
    const std::vector<TransitionChoice> script{choice::Proc{Pid{1}}, choice::Deliver{Pid{3}, Pid{2}}};
    const auto text = write_schedule_json(script);
    const auto back = read_schedule_json(text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(to_string(back[0]), to_string(script[0]));
    EXPECT_EQ(to_string(back[1]), to_string(script[1]));
    EXPECT_THROW(read_schedule_json(R"([{"kind":"proc"}])"), FormatError);
    EXPECT_THROW(read_schedule_json(R"({"kind":"proc","pid":"p1"})"), FormatError);
}

TEST(Commutation, AdjacentIndependentStepsCommute) {
    std::size_t pairs = 0, deliver_rec = 0;
    for (const auto& name : terminating_corpus()) {
        const auto prog = load_corpus(name);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto st = check_commutation(prog, seed, 100);
            EXPECT_EQ(st.failure, "") << name << " seed " << seed;
            pairs += st.pairs;
            deliver_rec += st.deliver_rec_pairs;
        }
    }
    EXPECT_GT(pairs, 100u);
    EXPECT_GT(deliver_rec, 0u);
}
