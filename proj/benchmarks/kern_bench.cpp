#include "kern/analysis.hpp"
#include "kern/parser.hpp"
#include "kern/rdebug.hpp"
#include "kern/runtime.hpp"

#include <benchmark/benchmark.h>

using namespace kern;

namespace {

constexpr std::size_t budget = 10'000'000;

// N workers each send `rounds` messages to a collector that takes them in
// arrival order.
Program fan_in(int workers, int rounds) {
    std::string src =
        "main() -> Me = self(), spawn_all(" + std::to_string(workers) + ", Me), collect(" +
        std::to_string(workers * rounds) +
        ", 0).\n"
        "spawn_all(N, Me) -> case N of 0 -> ok; _ -> spawn(worker, [Me, " + std::to_string(rounds) +
        "]), spawn_all(N - 1, Me) end.\n"
        "worker(P, K) -> case K of 0 -> ok; _ -> P ! {v, K}, worker(P, K - 1) end.\n"
        "collect(N, Acc) -> case N of 0 -> Acc; _ -> receive {v, X} -> collect(N - 1, Acc + X) end end.\n";
    return parse_program(src);
}

RunResult random_run(const Program& prog, std::uint64_t seed) {
    SchedulerConfig cfg;
    cfg.policy = policy::Random{seed};
    return run(prog, "main", cfg, budget);
}

void BM_Run(benchmark::State& state) {
    const auto prog = fan_in(static_cast<int>(state.range(0)), 8);
    std::uint64_t seed = 0;
    std::size_t events = 0;
    for (auto _ : state) {
        auto r = random_run(prog, seed++);
        events += r.events.size();
        benchmark::DoNotOptimize(r);
    }
    state.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Run)->Arg(4)->Arg(16)->Arg(64);

void BM_Replay(benchmark::State& state) {
    const auto prog = fan_in(static_cast<int>(state.range(0)), 8);
    const auto log = log_of(random_run(prog, 1).trace);
    ReplayOptions opts;
    opts.budget = budget;
    for (auto _ : state) benchmark::DoNotOptimize(replay(prog, "main", log, opts));
}
BENCHMARK(BM_Replay)->Arg(4)->Arg(16)->Arg(64);

void BM_HappenedBefore(benchmark::State& state) {
    const auto t = random_run(fan_in(static_cast<int>(state.range(0)), 8), 2).trace;
    for (auto _ : state) benchmark::DoNotOptimize(HappenedBefore(t));
    state.counters["events"] = static_cast<double>(t.event_count());
}
BENCHMARK(BM_HappenedBefore)->Arg(4)->Arg(16)->Arg(64);

void BM_AllRaceSets(benchmark::State& state) {
    const auto t = random_run(fan_in(static_cast<int>(state.range(0)), 8), 3).trace;
    for (auto _ : state) benchmark::DoNotOptimize(all_race_sets(t));
}
BENCHMARK(BM_AllRaceSets)->Arg(4)->Arg(16)->Arg(64);

void BM_RollbackToSpawn(benchmark::State& state) {
    const auto prog = fan_in(static_cast<int>(state.range(0)), 8);
    const auto log = log_of(random_run(prog, 4).trace);
    ReplayOptions opts;
    opts.budget = budget;
    const auto end = replay(prog, "main", log, opts).sys;
    for (auto _ : state) {
        RSystem s = end;
        benchmark::DoNotOptimize(perform(prog, s, request::BwdUntil{target::SpawnOf{Pid{2}}}, budget));
    }
}
BENCHMARK(BM_RollbackToSpawn)->Arg(4)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
