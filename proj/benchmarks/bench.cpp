#include <benchmark/benchmark.h>

#include <random>

#include "relevagan/data.hpp"
#include "relevagan/drl.hpp"
#include "relevagan/gan.hpp"
#include "relevagan/nn.hpp"

using namespace relevagan;

namespace {

nn::Network make_net(std::size_t in, std::size_t h1, std::size_t h2, std::size_t out) {
    std::mt19937_64 rng(1);
    nn::Network net;
    net.add(nn::make_dense(in, h1, nn::Activation::relu, rng));
    net.add(nn::make_dense(h1, h2, nn::Activation::relu, rng));
    net.add(nn::make_dense(h2, out, nn::Activation::sigmoid, rng));
    return net;
}

Matrix random_batch(std::size_t rows, std::size_t cols) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(rows, cols);
    for (double& v : m.data) v = u(rng);
    return m;
}

void bench_forward(benchmark::State& state) {
    nn::Network net = make_net(16, 128, 64, 1);
    Matrix x = random_batch(static_cast<std::size_t>(state.range(0)), 16);
    net.set_mode(nn::Mode::inference);
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bench_forward)->Arg(1)->Arg(32)->Arg(256);

void bench_forward_backward(benchmark::State& state) {
    nn::Network net = make_net(16, 128, 64, 1);
    Matrix x = random_batch(static_cast<std::size_t>(state.range(0)), 16);
    Matrix g(x.rows, 1, 1.0);
    net.set_mode(nn::Mode::training);
    for (auto _ : state) {
        net.forward(x);
        benchmark::DoNotOptimize(net.backward(g));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bench_forward_backward)->Arg(32)->Arg(256);

void bench_dqn_train_step(benchmark::State& state) {
    drl::DrlConfig cfg;
    drl::DqnAgent agent(16, cfg);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<drl::Transition> batch(cfg.minibatch);
    for (auto& t : batch) {
        t.state.resize(16);
        t.next_state.resize(16);
        for (auto& v : t.state) v = u(rng);
        for (auto& v : t.next_state) v = u(rng);
        t.action = rng() % 13;
        t.reward = static_cast<int>(rng() % 2);
        t.terminal = rng() % 5 == 0;
    }
    for (auto _ : state) benchmark::DoNotOptimize(agent.train_step(batch));
}
BENCHMARK(bench_dqn_train_step);

void bench_attack_session(benchmark::State& state) {
    data::FlowDataset ds = data::synth_fixture(200, 50, 16, 4.0, 1);
    data::ScalerParams sc = data::fit_scaler(ds);
    data::FlowDataset scaled = data::apply_scaler(ds, sc);
    data::ActionFeatureMap map = data::make_action_map(scaled);
    data::DeltaVector dv = data::compute_deltas(scaled, map);

    gan::GanConfig gcfg;
    gan::TwoHeadDiscriminator d = gan::make_discriminator(16, gcfg, 4);
    drl::DrlConfig cfg;
    cfg.rounds = static_cast<std::size_t>(state.range(0));
    drl::DqnAgent agent(16, cfg);
    drl::EvasionEnv env(dv, map,
                        [&d](std::span<const double> s) { return d.class_prob(s); });
    Matrix bots = data::sample_batch(scaled, data::Label::bot, 32, 5, true);
    for (auto _ : state)
        benchmark::DoNotOptimize(drl::run_attack_session(agent, env, bots, cfg.rounds));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bench_attack_session)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void bench_generate(benchmark::State& state) {
    gan::GanConfig cfg;
    gan::Generator g = gan::make_generator(cfg.noise_dim, 16, cfg, 7);
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(g.generate(256, seed++));
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(bench_generate);

}  // namespace

BENCHMARK_MAIN();
