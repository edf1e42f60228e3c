#include "server.hpp"

#include "kern/analysis.hpp"
#include "kern/json.hpp"
#include "kern/parser.hpp"
#include "kern/rdebug.hpp"
#include "kern/runtime.hpp"
#include "kern/service.hpp"
#include "kern/trace_io.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

using namespace kern;

namespace {

enum Exit : int {
    ok = 0,
    none_found = 1,
    usage = 2,
    stuck = 3,
    budget = 4,
    diverged = 5,
};

// Input errors: exit 2 with the message on stderr.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Program load_program(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    try {
        return parse_program(text);
    } catch (const ParseError& e) {
        throw InputError(path + ": " + e.what());
    }
}

template <class F>
auto read_input(const std::string& path, F parse) {
    try {
        return parse(read_text_file(path));
    } catch (const std::exception& e) {
        throw InputError(path + ": " + e.what());
    }
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_text_file(out_path, text);
    }
}

std::string join(const auto& items) {
    std::string out;
    for (const auto& x : items) {
        if (!out.empty()) out += ' ';
        out += x.str();
    }
    return out.empty() ? "none" : out;
}

struct SchedFlags {
    std::string sched = "rr";
    std::uint64_t seed = 0;
    std::string delivery = "lazy";
    std::string script;
    unsigned fuel = 1;

    void add(CLI::App& app) {
        app.add_option("--sched", sched, "Scheduler")->check(CLI::IsMember({"rr", "random", "scripted"}));
        app.add_option("--seed", seed, "Random seed");
        app.add_option("--delivery", delivery, "Delivery mode")->check(CLI::IsMember({"eager", "lazy"}));
        app.add_option("--script", script, "Scripted schedule file (with --sched scripted)");
        app.add_option("--fuel", fuel, "Round-robin steps per turn")->check(CLI::PositiveNumber);
    }

    SchedulerConfig config() const {
        SchedulerConfig cfg;
        cfg.delivery = delivery == "eager" ? Delivery::Eager : Delivery::Lazy;
        if (sched == "random") {
            cfg.policy = policy::Random{seed};
        } else if (sched == "scripted") {
            if (script.empty()) throw InputError("--sched scripted needs --script FILE");
            cfg.policy = policy::Scripted{read_input(script, [](const std::string& t) { return read_schedule_json(t); })};
        } else {
            cfg.policy = policy::RoundRobin{fuel};
        }
        return cfg;
    }
};

std::string analysis_text(const Trace& t) {
    std::ostringstream os;
    const auto s = symptoms(t);
    if (s.empty()) {
        os << "no symptoms\n";
    } else {
        os << "blocked: " << join(s.blocked) << "\n";
        os << "lost: " << join(s.lost) << "\n";
        os << "orphan: " << join(s.orphan) << "\n";
    }
    const auto sets = all_race_sets(t);
    if (sets.empty()) {
        os << "race sets: none\n";
    } else {
        os << "race sets:\n";
        for (const auto& [ref, rs] : sets) {
            os << "  " << to_string(ref) << " rec(" << rs.consumed.str() << "):";
            for (const auto& [sender, tags] : rs.races) os << " " << sender.str() << ": [" << join(tags) << "]";
            os << "\n";
        }
    }
    return os.str();
}

int cmd_run(const std::string& prog_path, const std::string& entry, const SchedFlags& flags, std::size_t budget_n,
            const std::string& out) {
    const auto prog = load_program(prog_path);
    RunResult r;
    try {
        r = run(prog, entry, flags.config(), budget_n);
    } catch (const InapplicableChoice& e) {
        throw InputError(e.what());
    } catch (const EvalError& e) {
        throw InputError(e.what());
    }
    emit(out, write_trace_json(r.events));
    for (const auto& [p, msg] : r.crashes) std::cerr << p.str() << " crashed: " << msg << "\n";
    switch (r.stop_reason) {
        case StopReason::Completed: return ok;
        case StopReason::Stuck: {
            const auto s = symptoms(r.trace);
            std::cerr << "stuck: blocked " << join(s.blocked) << "\n";
            return stuck;
        }
        case StopReason::Budget: std::cerr << "budget of " << budget_n << " transitions exhausted\n"; return budget;
    }
    return ok;
}

int cmd_analyze(const std::string& trace_path, bool as_json) {
    const auto file = read_input(trace_path, [](const std::string& t) { return read_trace_json(t); });
    if (as_json) {
        std::cout << analysis_json(file.trace).dump(2) << "\n";
    } else {
        std::cout << analysis_text(file.trace);
    }
    return symptoms(file.trace).empty() ? ok : stuck;
}

int cmd_replay(const std::string& prog_path, const std::string& entry, const std::string& log_path, bool cont,
               const SchedFlags& flags, std::size_t budget_n, const std::string& out) {
    const auto prog = load_program(prog_path);
    const auto log = read_input(log_path, [](const std::string& t) { return read_log_json(t); });
    ReplayOptions opts;
    opts.budget = budget_n;
    opts.continue_after_log = cont;
    opts.scheduler = flags.config();
    const auto r = replay(prog, entry, log, opts);
    emit(out, write_trace_json(r.events));
    if (r.problem) {
        std::cerr << to_string(*r.problem) << "\n";
        return diverged;
    }
    if (!r.log_completed) {
        std::cerr << "log not completed within " << budget_n << " transitions\n";
        return diverged;
    }
    return ok;
}

int cmd_explore(const std::string& prog_path, const std::string& entry, const std::string& find, std::size_t depth,
                std::uint64_t seed, std::size_t budget_n, std::size_t max_runs, bool as_json) {
    const auto prog = load_program(prog_path);
    ExploreConfig cfg;
    cfg.max_depth = depth;
    cfg.seed = seed;
    cfg.budget = budget_n;
    cfg.max_runs = max_runs;
    const auto kind = *parse_symptom_kind(find);
    cfg.targets = {kind};
    const auto report = explore(prog, entry, cfg);
    const auto it = report.witnesses.find(kind);
    if (as_json) {
        std::cout << exploration_json(report).dump(2) << "\n";
    } else if (it != report.witnesses.end()) {
        const auto& run = report.explored[it->second];
        std::cout << find << " witness (run " << it->second << ", depth " << run.depth << ", " << report.explored.size()
                  << " runs explored):\n";
        std::cout << write_log_json(run.log);
    } else {
        std::cout << "no witness (" << report.explored.size() << " runs explored, " << report.infeasible.size()
                  << " infeasible variants" << (report.frontier_exhausted ? "" : ", run limit reached") << ")\n";
    }
    return it != report.witnesses.end() ? ok : none_found;
}

int cmd_variant(const std::string& trace_path, const std::string& receive, const std::string& tag_s,
                const std::string& out) {
    const auto file = read_input(trace_path, [](const std::string& t) { return read_trace_json(t); });
    const auto colon = receive.find(':');
    const auto pid = parse_pid(receive.substr(0, colon));
    if (colon == std::string::npos || !pid) throw InputError("--receive must look like p2:1");
    std::size_t index = 0;
    try {
        index = std::stoul(receive.substr(colon + 1));
    } catch (const std::exception&) {
        throw InputError("--receive must look like p2:1");
    }
    const auto tag = parse_tag(tag_s);
    if (!tag) throw InputError("\"" + tag_s + "\" is not a tag");
    try {
        emit(out, write_log_json(race_variant(file.trace, EventRef{*pid, index}, *tag)));
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kern: run, analyze, replay and debug message-passing programs"};
    app.require_subcommand(1);

    std::string prog_path, entry = "main", out, trace_path, log_path, find, receive, tag, ui;
    std::size_t budget_n = default_budget, depth = 1, max_runs = 256;
    std::uint64_t seed = 0;
    bool as_json = false, as_text = false, cont = false, stdio = false;
    std::string host = "127.0.0.1";
    unsigned short port = 8080;
    SchedFlags sched;

    auto* run_cmd = app.add_subcommand("run", "Execute a program and write its trace");
    run_cmd->add_option("program", prog_path, "Program (.kern)")->required();
    run_cmd->add_option("--entry", entry, "Entry function (arity 0)");
    sched.add(*run_cmd);
    run_cmd->add_option("--budget", budget_n, "Transition budget");
    run_cmd->add_option("--out", out, "Trace file (default stdout)");

    auto* analyze_cmd = app.add_subcommand("analyze", "Report symptoms and race sets of a trace");
    analyze_cmd->add_option("trace", trace_path, "Trace file")->required();
    auto* json_flag = analyze_cmd->add_flag("--json", as_json, "JSON report");
    analyze_cmd->add_flag("--text", as_text, "Text report (default)")->excludes(json_flag);

    SchedFlags replay_sched;
    auto* replay_cmd = app.add_subcommand("replay", "Replay a program along a log");
    replay_cmd->add_option("program", prog_path, "Program (.kern)")->required();
    replay_cmd->add_option("--log", log_path, "Log file")->required();
    replay_cmd->add_option("--entry", entry, "Entry function");
    replay_cmd->add_flag("--continue", cont, "Keep running once the log is used up");
    replay_sched.add(*replay_cmd);
    replay_cmd->add_option("--budget", budget_n, "Transition budget");
    replay_cmd->add_option("--out", out, "Trace file (default stdout)");

    auto* explore_cmd = app.add_subcommand("explore", "Search race variants for a symptom");
    explore_cmd->add_option("program", prog_path, "Program (.kern)")->required();
    explore_cmd->add_option("--find", find, "Symptom")->required()->check(CLI::IsMember({"deadlock", "orphan", "lost"}));
    explore_cmd->add_option("--depth", depth, "Substitutions along one path");
    explore_cmd->add_option("--seed", seed, "Random seed");
    explore_cmd->add_option("--entry", entry, "Entry function");
    explore_cmd->add_option("--budget", budget_n, "Transitions per run");
    explore_cmd->add_option("--max-runs", max_runs, "Replays before giving up");
    explore_cmd->add_flag("--json", as_json, "Full exploration report");

    auto* log_cmd = app.add_subcommand("log", "Write the log of a trace");
    log_cmd->add_option("trace", trace_path, "Trace file")->required();
    log_cmd->add_option("--out", out, "Log file (default stdout)");

    auto* variant_cmd = app.add_subcommand("variant", "Write the race-variant log of a trace");
    variant_cmd->add_option("trace", trace_path, "Trace file")->required();
    variant_cmd->add_option("--receive", receive, "Receive event, e.g. p2:1")->required();
    variant_cmd->add_option("--tag", tag, "Racing message to receive instead")->required();
    variant_cmd->add_option("--out", out, "Log file (default stdout)");

    auto* serve_cmd = app.add_subcommand("serve", "Debug session server");
    serve_cmd->add_option("--port", port, "TCP port");
    serve_cmd->add_option("--host", host, "Listen address");
    serve_cmd->add_option("--ui", ui, "Directory served at /")->check(CLI::ExistingDirectory);
    serve_cmd->add_flag("--stdio", stdio, "Line-delimited protocol on stdin/stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        if (*run_cmd) return cmd_run(prog_path, entry, sched, budget_n, out);
        if (*analyze_cmd) return cmd_analyze(trace_path, as_json);
        if (*replay_cmd) return cmd_replay(prog_path, entry, log_path, cont, replay_sched, budget_n, out);
        if (*explore_cmd) return cmd_explore(prog_path, entry, find, depth, seed, budget_n, max_runs, as_json);
        if (*log_cmd) {
            const auto file = read_input(trace_path, [](const std::string& t) { return read_trace_json(t); });
            emit(out, write_log_json(log_of(file.trace)));
            return ok;
        }
        if (*variant_cmd) return cmd_variant(trace_path, receive, tag, out);
        if (*serve_cmd) {
            Service service;
            if (stdio) {
                serve_stdio(service, std::cin, std::cout);
                return ok;
            }
            Server server(service, ServerOptions{host, port, ui});
            std::cerr << "listening on http://" << host << ":" << server.port() << " (websocket at /api)\n";
            server.run();
            return ok;
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    }
    return usage;
}
