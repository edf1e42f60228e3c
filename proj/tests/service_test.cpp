#include "kern/analysis.hpp"
#include "kern/service.hpp"
#include "kern/trace_io.hpp"

#include "support/corpus.hpp"
#include "support/example_traces.hpp"

#include <gtest/gtest.h>

using namespace kern;
using namespace kern::testing;

namespace {

json schedule(const std::string& name) { return json::parse(read_text_file(corpus_path(name))); }

// Sends one request and returns its result, failing the test on an error.
json ok(Service& svc, const std::string& method, json params) {
    auto reply = svc.handle(json{{"id", 1}, {"method", method}, {"params", std::move(params)}});
    EXPECT_FALSE(reply.response.contains("error")) << method << ": " << reply.response.dump();
    return reply.response.value("result", json{});
}

json error_of(Service& svc, const std::string& method, json params) {
    auto reply = svc.handle(json{{"id", 1}, {"method", method}, {"params", std::move(params)}});
    EXPECT_TRUE(reply.response.contains("error")) << method << ": " << reply.response.dump();
    return reply.response.value("error", json{});
}

json load_fig1b(Service& svc, const std::string& prog = "fig1.kern") {
    return ok(svc, "load", {{"path", corpus_path(prog)}, {"mode", "record"}, {"schedule", schedule("fig1b.sched")}});
}

json tag_target(const char* kind, const char* tag) { return json{{"kind", kind}, {"tag", tag}}; }

// The whole debugging session from the command line walkthrough, as request lines.
std::vector<std::string> headless_script() {
    const auto sched = schedule("fig1b.sched").dump();
    const auto path = json(corpus_path("fig1.kern")).dump();
    return {
        R"({"id":1,"method":"load","params":{"path":)" + path + R"(,"mode":"record","schedule":)" + sched + "}}",
        R"({"id":2,"method":"run_until","params":{"session":"s1","target":{"kind":"rec","tag":"l1"}}})",
        R"({"id":3,"method":"race_sets","params":{"session":"s1"}})",
        R"({"id":4,"method":"fork_variant","params":{"session":"s1","receive":{"pid":"p2","index":1},"tag":"l2"}})",
        R"({"id":5,"method":"fork_variant","params":{"session":"s1","receive":{"pid":"p2","index":1},"tag":"l3"}})",
        R"({"id":6,"method":"run_until","params":{"session":"s3","target":{"kind":"rec","tag":"l3"}}})",
        R"({"id":7,"method":"step_bwd","params":{"session":"s3","pid":"p2"}})",
        R"({"id":8,"method":"rollback_until","params":{"session":"s1","target":{"kind":"spawn","pid":"p3"}}})",
        R"({"id":9,"method":"snapshot","params":{"session":"s1"}})",
    };
}

std::vector<std::string> run_script(const std::vector<std::string>& lines) {
    Service svc;
    std::vector<std::string> out;
    for (const auto& l : lines) {
        for (auto& m : svc.handle_line(l)) out.push_back(std::move(m));
    }
    return out;
}

}  // namespace

TEST(Service, LoadReturnsASnapshot) {
    Service svc;
    auto reply = svc.handle(json{{"id", 7}, {"method", "load"},
                                 {"params", {{"path", corpus_path("fig1.kern")}, {"mode", "free"}}}});
    EXPECT_EQ(reply.response["id"], 7);
    const auto& r = reply.response["result"];
    EXPECT_EQ(r["session"], "s1");
    EXPECT_EQ(r["mode"], "free");
    ASSERT_EQ(r["processes"].size(), 1u);
    EXPECT_EQ(r["processes"][0]["pid"], "p1");
    ASSERT_EQ(reply.notifications.size(), 1u);
    EXPECT_EQ(reply.notifications[0]["method"], "state_changed");
    EXPECT_EQ(reply.notifications[0]["params"]["session"], "s1");
    EXPECT_EQ(svc.session_count(), 1u);
}

TEST(Service, HeadlessWalkthrough) {
    Service svc;
    load_fig1b(svc);

    const auto until = ok(svc, "run_until", {{"session", "s1"}, {"target", tag_target("rec", "l1")}});
    EXPECT_TRUE(until["reached"].get<bool>());
    EXPECT_EQ(until["forward"].back()["pid"], "p2");

    const auto rs = ok(svc, "race_sets", {{"session", "s1"}});
    EXPECT_EQ(rs["source"], "reference");
    ASSERT_EQ(rs["race_sets"].size(), 1u);
    EXPECT_EQ(rs["race_sets"][0]["receive"]["tag"], "l1");
    EXPECT_EQ(rs["race_sets"][0]["races"], (json{{"p3", {"l2", "l3"}}}));

    const json receive{{"pid", "p2"}, {"index", 1}};
    const auto bad = ok(svc, "fork_variant", {{"session", "s1"}, {"receive", receive}, {"tag", "l2"}});
    EXPECT_FALSE(bad["feasible"].get<bool>());
    EXPECT_EQ(bad["problem"]["kind"], "stuck_at_receive");
    EXPECT_TRUE(bad["problem"]["present"].get<bool>());
    EXPECT_EQ(bad["parent"], "s1");

    const auto good = ok(svc, "fork_variant", {{"session", "s1"}, {"receive", receive}, {"tag", "l3"}});
    EXPECT_TRUE(good["feasible"].get<bool>());
    EXPECT_TRUE(good["problem"].is_null());
    const auto id = good["session"].get<std::string>();
    EXPECT_TRUE(ok(svc, "run_until", {{"session", id}, {"target", tag_target("rec", "l3")}})["reached"].get<bool>());

    EXPECT_EQ(ok(svc, "list_sessions", json::object())["sessions"].size(), 3u);
    ok(svc, "close", {{"session", bad["session"]}});
    EXPECT_EQ(svc.session_count(), 2u);
}

TEST(Service, ForkMatchesRaceVariant) {
    Service svc;
    load_fig1b(svc);
    const auto r = ok(svc, "fork_variant", {{"session", "s1"}, {"receive", {{"pid", "p2"}, {"index", 1}}}, {"tag", "l3"}});
    const auto variant = read_log_json(json{{"version", 1}, {"log", r["variant_log"]}}.dump());

    SchedulerConfig cfg;
    cfg.policy = policy::Scripted{read_schedule_json(read_text_file(corpus_path("fig1b.sched")))};
    const auto t = run(load_corpus("fig1.kern"), "main", cfg).trace;
    EXPECT_TRUE(log_equal(variant, race_variant(t, {Pid{2}, 1}, Tag{3})));
}

TEST(Service, OutputsAreDeterministic) {
    const auto a = run_script(headless_script());
    const auto b = run_script(headless_script());
    EXPECT_EQ(a, b);
    ASSERT_FALSE(a.empty());
    for (const auto& line : a) EXPECT_EQ(line.find('\n'), std::string::npos);
}

TEST(Service, SessionsAreIsolated) {
    Service svc;
    load_fig1b(svc);
    load_fig1b(svc);
    const auto before = ok(svc, "snapshot", {{"session", "s2"}});
    ok(svc, "run_until", {{"session", "s1"}, {"target", {{"kind", "deadlock"}}}});
    auto after = ok(svc, "snapshot", {{"session", "s2"}});
    EXPECT_EQ(after, before);
    EXPECT_NE(ok(svc, "snapshot", {{"session", "s1"}}), before);
}

TEST(Service, SequenceNumbersIncrease) {
    Service svc;
    load_fig1b(svc);
    auto reply = svc.handle(json{{"id", 2}, {"method", "step_fwd"}, {"params", {{"session", "s1"}, {"pid", "p1"}}}});
    ASSERT_EQ(reply.notifications.size(), 1u);
    const auto seq1 = reply.notifications[0]["params"]["seq"].get<std::uint64_t>();
    reply = svc.handle(json{{"id", 3}, {"method", "step_fwd"}, {"params", {{"session", "s1"}, {"pid", "p1"}}}});
    EXPECT_GT(reply.notifications[0]["params"]["seq"].get<std::uint64_t>(), seq1);
    EXPECT_EQ(reply.response["result"]["seq"], reply.notifications[0]["params"]["seq"]);
}

TEST(Service, BlockedUndoListsPrerequisites) {
    Service svc;
    ok(svc, "load", {{"path", corpus_path("fig1_star.kern")}, {"mode", "record"}, {"schedule", schedule("fig1b.sched")}});
    ok(svc, "run_until", {{"session", "s1"}, {"target", {{"kind", "deadlock"}}}});
    ok(svc, "rollback_until", {{"session", "s1"}, {"target", tag_target("deliver", "l1")}});
    ok(svc, "step_bwd", {{"session", "s1"}, {"pid", "p1"}});  // exit
    ok(svc, "step_bwd", {{"session", "s1"}, {"pid", "p1"}});  // send(l1)
    const auto before = ok(svc, "snapshot", {{"session", "s1"}});

    auto reply = svc.handle(json{{"id", 9}, {"method", "step_bwd"}, {"params", {{"session", "s1"}, {"pid", "p1"}}}});
    ASSERT_TRUE(reply.response.contains("error"));
    EXPECT_TRUE(reply.notifications.empty());
    const auto& err = reply.response["error"];
    EXPECT_EQ(err["code"], error_code::undo_blocked);
    std::vector<std::string> described;
    for (const auto& p : err["data"]["prerequisites"]) described.push_back(p["description"]);
    // Driving to the deadlock delivered l2 ahead of l1, so rolling back to
    // deliver(l1) left deliver(l2) in place on p2.
    EXPECT_EQ(described, (std::vector<std::string>{"undo exit on p3", "undo send(l3) on p3", "undo deliver(l2) on p2",
                                                   "undo send(l2) on p3"}));
    EXPECT_EQ(ok(svc, "snapshot", {{"session", "s1"}}), before);
}

TEST(Service, Errors) {
    Service svc;
    EXPECT_EQ(error_of(svc, "snapshot", {{"session", "s9"}})["code"], error_code::unknown_session);
    EXPECT_EQ(error_of(svc, "frobnicate", json::object())["code"], error_code::method_not_found);
    EXPECT_EQ(error_of(svc, "load", {{"source", "main() -> ."}})["code"], error_code::program_error);
    EXPECT_EQ(error_of(svc, "load", {{"source", "main() -> ok."}, {"mode", "sideways"}})["code"],
              error_code::invalid_params);
    load_fig1b(svc);
    EXPECT_EQ(error_of(svc, "step_fwd", {{"session", "s1"}})["code"], error_code::invalid_params);
    EXPECT_EQ(error_of(svc, "step_fwd", {{"session", "s1"}, {"pid", "banana"}})["code"], error_code::invalid_params);
    EXPECT_EQ(error_of(svc, "run_until", {{"session", "s1"}, {"target", {{"kind", "teleport"}}}})["code"],
              error_code::invalid_params);
    EXPECT_EQ(error_of(svc, "step_fwd", {{"session", "s1"}, {"pid", "p42"}})["code"], error_code::request_failed);
    EXPECT_EQ(error_of(svc, "fork_variant", {{"session", "s1"}, {"receive", {{"pid", "p2"}, {"index", 1}}}, {"tag", "l1"}})["code"],
              error_code::invalid_params);

    const auto bad_json = svc.handle_line("{not json");
    ASSERT_EQ(bad_json.size(), 1u);
    EXPECT_EQ(json::parse(bad_json[0])["error"]["code"], error_code::parse_error);
    const auto no_method = svc.handle_line(R"({"id":3})");
    EXPECT_EQ(json::parse(no_method[0])["error"]["code"], error_code::invalid_request);
    EXPECT_EQ(json::parse(no_method[0])["id"], 3);
}

TEST(Service, ReplayModeReportsProblems) {
    Service svc;
    auto log = log_star();
    log.seq[Pid{2}] = {logact::Rec{Tag{2}}};
    const auto r = ok(svc, "load", {{"path", corpus_path("fig1.kern")}, {"log", json::parse(write_log_json(log))}});
    EXPECT_EQ(r["mode"], "replay");
    EXPECT_EQ(r["problem"]["kind"], "stuck_at_receive");
    EXPECT_EQ(r["problem"]["tag"], "l2");
}

TEST(Service, FreeModeUsesTheCurrentTrace) {
    Service svc;
    ok(svc, "load", {{"path", corpus_path("fig1.kern")}, {"mode", "free"}});
    EXPECT_EQ(ok(svc, "race_sets", {{"session", "s1"}})["source"], "current");
}
