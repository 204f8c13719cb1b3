#include <benchmark/benchmark.h>

#include "bart/agents.hpp"
#include "bart/features.hpp"
#include "bart/maxent.hpp"
#include "bart/task.hpp"

namespace {

using namespace bart;

std::vector<Session> population(int subjects) {
    AgentSpec spec;
    spec.kind = ThresholdAgent{30.0, 2.0};
    spec.n_subjects = subjects;
    spec.seed = 1;
    return generate_population(spec, BartConfig{});
}

std::vector<Demonstration> train_demos(int subjects) {
    const auto sessions = population(subjects);
    return make_demonstrations(sessions, train_test_split(sessions, SplitScheme::Interleaved).train);
}

ThetaWeights some_theta() {
    ThetaWeights t{};
    t[1] = 0.3;
    t[8] = -0.2;
    t[10] = -0.01;
    return t;
}

void BM_SoftBackward(benchmark::State& state) {
    const BartConfig cfg;
    const auto f = feature_matrix(HistoryBuilder(cfg.max_state).context());
    const auto theta = some_theta();
    for (auto _ : state) benchmark::DoNotOptimize(soft_backward(theta, f, cfg));
}
BENCHMARK(BM_SoftBackward);

void BM_ForwardVisitation(benchmark::State& state) {
    const BartConfig cfg;
    const auto pol = soft_backward(some_theta(), feature_matrix(HistoryBuilder(cfg.max_state).context()), cfg);
    for (auto _ : state) benchmark::DoNotOptimize(forward_visitation(pol, cfg));
}
BENCHMARK(BM_ForwardVisitation);

void BM_Gradient(benchmark::State& state) {
    const auto demos = train_demos(static_cast<int>(state.range(0)));
    const auto theta = some_theta();
    for (auto _ : state) benchmark::DoNotOptimize(gradient(theta, demos, BartConfig{}, 1));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(demos.size()));
}
BENCHMARK(BM_Gradient)->Arg(10)->Arg(100);

void BM_LogLikelihood(benchmark::State& state) {
    const auto demos = train_demos(100);
    const auto theta = some_theta();
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_likelihood(theta, demos, BartConfig{}, 1));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(demos.size()));
}
BENCHMARK(BM_LogLikelihood);

void BM_SessionFeatures(benchmark::State& state) {
    const auto sessions = population(1);
    for (auto _ : state) benchmark::DoNotOptimize(session_feature_matrices(sessions[0]));
}
BENCHMARK(BM_SessionFeatures);

void BM_Train(benchmark::State& state) {
    const auto demos = train_demos(50);
    TrainOptions opts;
    opts.threads = 1;
    for (auto _ : state) benchmark::DoNotOptimize(train(demos, BartConfig{}, opts));
}
BENCHMARK(BM_Train)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
