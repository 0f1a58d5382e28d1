// Acceptance gate: one pass/fail line per criterion, exit code = number of
// failures. Slow end-to-end runs share a pool of fixture trainings.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "relevagan/data.hpp"
#include "relevagan/drl.hpp"
#include "relevagan/gan.hpp"
#include "relevagan/harness.hpp"
#include "relevagan/nn.hpp"

using namespace relevagan;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass,
            const std::string& detail) {
    std::printf("[%s] %2d. %-28s %s\n", pass ? "PASS" : "FAIL", criterion,
                name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void report_skip(int criterion, const std::string& name, const std::string& detail) {
    std::printf("[SKIP] %2d. %-28s %s\n", criterion, name.c_str(), detail.c_str());
    std::fflush(stdout);
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

// ---- criterion 1: gradient soundness ---------------------------------------

void criterion_gradients() {
    double start = now_seconds();
    std::mt19937_64 rng(20240601);
    bool ok = true;
    std::size_t checked = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 20 && ok; ++trial) {
        std::uniform_int_distribution<std::size_t> wdist(2, 32);
        std::uniform_int_distribution<int> ddist(1, 3);
        int depth = ddist(rng);
        bool with_bn = trial % 3 == 1;

        nn::Network net;
        std::size_t in = wdist(rng);
        std::size_t cur = in;
        for (int layer = 0; layer < depth; ++layer) {
            std::size_t out = wdist(rng);
            bool last = layer == depth - 1;
            nn::Activation act = last
                                     ? (trial % 2 ? nn::Activation::sigmoid
                                                  : nn::Activation::linear)
                                     : nn::Activation::relu;
            if (with_bn && !last) {
                net.add(nn::make_dense(cur, out, nn::Activation::linear, rng));
                net.add(nn::BatchNormLayer(out));
                net.add(nn::ActivationLayer{nn::Activation::relu});
            } else {
                net.add(nn::make_dense(cur, out, act, rng));
            }
            cur = out;
        }

        Matrix x(5, in);
        Matrix w(5, cur);
        std::normal_distribution<double> nd;
        for (double& v : x.data) v = nd(rng);
        for (double& v : w.data) v = nd(rng);

        net.set_mode(nn::Mode::training);
        net.forward(x);
        nn::Network::Gradients g = net.backward(w);
        std::vector<double> fd = oracles::finite_difference_grads(net, x, w);
        for (std::size_t i = 0; i < fd.size(); ++i) {
            double denom = std::max({1.0, std::fabs(fd[i]), std::fabs(g.params[i])});
            double rel = std::fabs(fd[i] - g.params[i]) / denom;
            worst = std::max(worst, rel);
            if (rel >= 1e-4) ok = false;
        }
        checked += fd.size();
    }
    double secs = now_seconds() - start;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "20 nets, %zu params checked, worst rel err %.2e, %.1fs (budget 30s)",
                  checked, worst, secs);
    report(1, "gradient soundness", ok && secs < 30.0, buf);
}

// ---- criterion 2: loss/target oracles --------------------------------------

void criterion_oracles() {
    double start = now_seconds();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    double worst_bce = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + trial % 64;
        std::vector<double> p(n), t(n);
        for (auto& v : p) v = u(rng);
        for (auto& v : t) v = u(rng) < 0.5 ? 0.0 : 1.0;
        worst_bce = std::max(worst_bce,
                             std::fabs(nn::bce(p, t).loss - oracles::bce_mean(p, t)));
    }

    // Loss components as reported by the GAN steps, against the oracle on
    // pre-update inference scores (the trunk is relu-dense, so identical).
    gan::GanConfig gcfg;
    gcfg.trunk_hidden = {16, 8};
    gan::TwoHeadDiscriminator d = gan::make_discriminator(13, gcfg, 5);
    Matrix normal(16, 13), bot(16, 13), fake(16, 13);
    for (double& v : normal.data) v = u(rng);
    for (double& v : bot.data) v = u(rng);
    for (double& v : fake.data) v = u(rng);
    std::vector<double> ones(16, 1.0), zeros(16, 0.0);
    auto sn = d.predict(normal);
    auto sb = d.predict(bot);
    gan::RealLoss rl = gan::d_step_real(d, normal, bot);
    worst_bce = std::max(worst_bce,
                         std::fabs(rl.class_on_normal - oracles::bce_mean(sn.cls, ones)));
    worst_bce = std::max(worst_bce,
                         std::fabs(rl.source_on_bot - oracles::bce_mean(sb.source, ones)));
    worst_bce = std::max(worst_bce,
                         std::fabs(rl.class_on_bot - oracles::bce_mean(sb.cls, zeros)));
    auto sf = d.predict(fake);
    gan::FakeLoss fl = gan::d_step_fake(d, fake);
    worst_bce = std::max(worst_bce,
                         std::fabs(fl.source - oracles::bce_mean(sf.source, zeros)));
    worst_bce = std::max(worst_bce,
                         std::fabs(fl.cls - oracles::bce_mean(sf.cls, zeros)));

    // Double-DQN targets on 1000 random transitions, exact equality.
    drl::DrlConfig dcfg;
    dcfg.hidden = {16, 16};
    dcfg.seed = 9;
    drl::DqnAgent agent(13, dcfg);
    // A few updates so online and target genuinely differ.
    for (int i = 0; i < 8; ++i) {
        std::vector<drl::Transition> batch;
        for (int j = 0; j < 8; ++j) {
            drl::Transition t;
            t.state.resize(13);
            t.next_state.resize(13);
            for (auto& v : t.state) v = u(rng);
            for (auto& v : t.next_state) v = u(rng);
            t.action = static_cast<std::size_t>(j) % 13;
            t.reward = j % 2;
            t.terminal = j % 5 == 0;
            batch.push_back(t);
        }
        agent.train_step(batch);
    }
    bool dqn_ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        drl::Transition t;
        t.state.resize(13);
        t.next_state.resize(13);
        for (auto& v : t.state) v = u(rng);
        for (auto& v : t.next_state) v = u(rng);
        t.reward = trial % 2;
        t.terminal = trial % 11 == 0;

        std::vector<double> qo = agent.q_values(t.next_state);
        std::vector<double> qt = agent.target_q_values(t.next_state);
        double got = drl::dqn_target(t, qo, qt, 0.99);

        double want;
        if (t.terminal) {
            want = t.reward;
        } else {
            std::size_t best = 0;
            for (std::size_t a = 1; a < qo.size(); ++a)
                if (qo[a] > qo[best]) best = a;
            want = static_cast<double>(t.reward) + 0.99 * qt[best];
        }
        if (got != want) dqn_ok = false;
    }

    double secs = now_seconds() - start;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "worst BCE dev %.2e (limit 1e-10), DQN targets %s, %.1fs (budget 10s)",
                  worst_bce, dqn_ok ? "exact" : "MISMATCH", secs);
    report(2, "loss/target oracles", worst_bce < 1e-10 && dqn_ok && secs < 10.0, buf);
}

// ---- criterion 3: delta rule ----------------------------------------------

void criterion_deltas() {
    double start = now_seconds();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool ok = true;
    for (int trial = 0; trial < 100 && ok; ++trial) {
        data::FlowDataset ds = data::synth_fixture(20 + trial % 30, 8, 13 + trial % 4,
                                                   2.0, trial);
        // Zero-heavy and negative-heavy columns.
        for (double& v : ds.X.data) {
            double r = u(rng);
            if (r < 0.4) v = 0.0;
            else if (r < 0.5) v = -v;
        }
        data::ActionFeatureMap map = data::make_action_map(ds);
        data::DeltaVector dv = data::compute_deltas(ds, map);
        for (std::size_t a = 0; a < map.indices.size(); ++a) {
            double want = oracles::min_positive_or_fallback(ds.X, map.indices[a],
                                                            data::kDeltaFallback);
            if (dv.values[a] != want) ok = false;
        }
    }
    double secs = now_seconds() - start;
    char buf[120];
    std::snprintf(buf, sizeof(buf), "100 matrices, %.1fs (budget 5s)", secs);
    report(3, "delta rule vs brute force", ok && secs < 5.0, buf);
}

// ---- fixture run pool ------------------------------------------------------

harness::ExperimentConfig fixture_config(harness::ModelKind model, std::uint64_t seed,
                                         const std::string& out) {
    harness::ExperimentConfig cfg;
    cfg.model = model;
    cfg.fixture_normal = 5000;
    cfg.fixture_bot = 200;
    cfg.fixture_features = 16;
    cfg.fixture_separation = 4.0;
    cfg.batch_size = 256;
    cfg.seed = seed;
    cfg.out_dir = out;
    return cfg;
}

struct Pool {
    harness::RunArtifacts convergence_run;            // criterion 5, seed 1
    std::vector<harness::RunArtifacts> relevagan;     // 3 seeds, short horizon
    std::vector<harness::RunArtifacts> evagan;        // matched
    double convergence_wall = 0.0;
};

Pool run_pool(const fs::path& out_root) {
    Pool pool;

    // Full-fidelity convergence run: default attack cadence, early stop once
    // the detection metrics settle.
    {
        harness::ExperimentConfig cfg = fixture_config(
            harness::ModelKind::relevagan, 1, (out_root / "c5-relevagan").string());
        cfg.epochs = 50;
        cfg.early_stop_detection = true;
        double t0 = now_seconds();
        pool.convergence_run = harness::train(cfg);
        pool.convergence_wall = now_seconds() - t0;
    }

    // Matched short-horizon runs for the comparative criteria. The attack
    // session keeps its 256 rounds but trains the DQN every 4th step to keep
    // the 3-seed sweep inside the desk budget.
    for (std::uint64_t seed : {1, 2, 3}) {
        harness::ExperimentConfig r = fixture_config(
            harness::ModelKind::relevagan, seed,
            (out_root / ("pool-rel-" + std::to_string(seed))).string());
        r.epochs = 15;
        r.drl.train_every = 4;
        pool.relevagan.push_back(harness::train(r));

        harness::ExperimentConfig e = fixture_config(
            harness::ModelKind::evagan, seed,
            (out_root / ("pool-eva-" + std::to_string(seed))).string());
        e.epochs = 15;
        pool.evagan.push_back(harness::train(e));
    }
    return pool;
}

// ---- criterion 4: perturbation semantics -----------------------------------

void criterion_perturbations(const Pool& pool) {
    bool ok = true;
    std::size_t checked = 0;
    std::string why;

    auto check_run = [&](const harness::RunArtifacts& art) {
        std::vector<double> col_delta(art.config.fixture_features, -1.0);
        for (std::size_t a = 0; a < art.action_map.indices.size(); ++a)
            col_delta[art.action_map.indices[a]] = art.deltas.values[a];
        for (const auto& ev : art.evasion_audit) {
            ++checked;
            for (std::size_t j = 0; j < ev.seed.size(); ++j) {
                double diff = ev.evasion[j] - ev.seed[j];
                if (col_delta[j] < 0.0) {  // not an action feature
                    if (diff != 0.0) { ok = false; why = "off-map change"; }
                } else {
                    if (diff < 0.0) { ok = false; why = "negative change"; }
                    if (diff > 13.0 * col_delta[j] + 1e-9) {
                        ok = false;
                        why = "budget exceeded";
                    }
                }
            }
        }
    };
    check_run(pool.convergence_run);
    for (const auto& art : pool.relevagan) check_run(art);

    char buf[120];
    std::snprintf(buf, sizeof(buf), "%zu evasions checked exhaustively%s%s", checked,
                  ok ? "" : ": ", why.c_str());
    report(4, "perturbation semantics", ok && checked > 0, buf);
}

// ---- criterion 5: desk-scale convergence -----------------------------------

void criterion_convergence(const Pool& pool) {
    const auto& recs = pool.convergence_run.records;
    bool ok = false;
    std::size_t at = 0;
    for (const auto& r : recs) {
        if (r.real_normal_est >= 0.9 && r.real_bot_eva <= 0.1 && r.fake_bot_eva <= 0.1) {
            ok = true;
            at = r.epoch;
            break;
        }
    }
    bool in_budget = pool.convergence_wall < 900.0 && (!ok || at <= 50);
    char buf[160];
    const auto& last = recs.back();
    std::snprintf(buf, sizeof(buf),
                  "epoch %zu of %zu, rne %.3f rbe %.3f fbe %.3f, %.0fs (budget 900s)",
                  ok ? at : recs.size(), recs.size(), last.real_normal_est,
                  last.real_bot_eva, last.fake_bot_eva, pool.convergence_wall);
    report(5, "desk-scale convergence", ok && in_budget, buf);
}

// ---- criterion 6: evasion die-off ------------------------------------------

void criterion_dieoff(const Pool& pool) {
    bool ok = true;
    std::ostringstream detail;
    auto last_active = [](const harness::RunArtifacts& art) {
        std::size_t last = 0;
        for (const auto& r : art.records)
            if (r.evasions > 0) last = r.epoch;
        return last;
    };
    std::vector<const harness::RunArtifacts*> runs;
    for (const auto& a : pool.relevagan) runs.push_back(&a);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::size_t last = last_active(*runs[i]);
        std::size_t horizon = runs[i]->records.size();
        detail << (i ? ", " : "") << "seed " << runs[i]->config.seed << ": last evasion epoch "
               << last << "/" << horizon;
        // Die-off: evasions stop at some epoch <= 25 with a zero tail after it.
        if (last > 25 || last >= horizon) ok = false;
    }
    // The long seed-1 run corroborates over its full horizon.
    std::size_t long_last = last_active(pool.convergence_run);
    detail << "; long run last " << long_last << "/" << pool.convergence_run.records.size();
    if (long_last > 25) ok = false;
    report(6, "evasion die-off", ok, detail.str());
}

// ---- criterion 7: earlier convergence than EVAGAN --------------------------

std::size_t median_convergence(const std::vector<harness::RunArtifacts>& runs) {
    std::vector<std::size_t> v;
    for (const auto& art : runs)
        v.push_back(art.convergence_epoch ? *art.convergence_epoch
                                          : std::numeric_limits<std::size_t>::max());
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

void criterion_earlier(const Pool& pool) {
    std::size_t rel = median_convergence(pool.relevagan);
    std::size_t eva = median_convergence(pool.evagan);
    auto show = [](std::size_t m) {
        return m == std::numeric_limits<std::size_t>::max() ? std::string("none")
                                                            : std::to_string(m);
    };
    char buf[120];
    std::snprintf(buf, sizeof(buf), "median convergence epoch: relevagan %s, evagan %s",
                  show(rel).c_str(), show(eva).c_str());
    report(7, "earlier convergence", rel <= eva, buf);
}

// ---- criterion 8: time-complexity direction --------------------------------

void criterion_timing(const Pool& pool) {
    auto mean_epoch_seconds = [](const std::vector<harness::RunArtifacts>& runs) {
        double total = 0.0;
        std::size_t n = 0;
        for (const auto& art : runs)
            for (const auto& r : art.records) {
                total += r.seconds;
                ++n;
            }
        return total / static_cast<double>(n);
    };
    double rel = mean_epoch_seconds(pool.relevagan);
    double eva = mean_epoch_seconds(pool.evagan);
    char buf[120];
    std::snprintf(buf, sizeof(buf), "mean epoch seconds: relevagan %.3f, evagan %.3f",
                  rel, eva);
    report(8, "time-complexity direction", rel > eva, buf);
}

// ---- criterion 9: determinism ----------------------------------------------

void criterion_determinism(const fs::path& out_root) {
    harness::ExperimentConfig cfg = fixture_config(harness::ModelKind::relevagan, 17,
                                                   (out_root / "det-a").string());
    cfg.fixture_normal = 400;
    cfg.fixture_bot = 40;
    cfg.epochs = 3;
    cfg.batch_size = 128;
    cfg.drl.rounds = 32;
    cfg.deterministic_seconds = true;
    harness::train(cfg);
    cfg.out_dir = (out_root / "det-b").string();
    harness::train(cfg);

    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    std::string a = slurp(out_root / "det-a" / "epochs.csv");
    std::string b = slurp(out_root / "det-b" / "epochs.csv");
    bool ok = !a.empty() && a == b;
    report(9, "determinism", ok,
           ok ? "epochs.csv bit-identical across reruns" : "reports differ");
}

// ---- criterion 10: real-corpora ingestion counts ---------------------------

void criterion_ingestion() {
    struct Corpus {
        const char* file;
        std::size_t normal;
        std::size_t bot;
        std::set<std::string> bot_labels;
    };
    const char* env = std::getenv("RELEVAGAN_DATA_DIR");
    fs::path dir = env ? fs::path(env) : fs::path("data");
    std::vector<Corpus> corpora = {
        {"ISCX-2014.csv", 246929, 1748, {"Virut", "bot"}},
        {"CIC-2017.csv", 70374, 1956, {"Ares", "bot"}},
        {"CIC-2018.csv", 390961, 2560, {"Ares", "Zeus", "bot"}},
    };
    bool any = false, ok = true;
    std::ostringstream detail;
    for (const auto& c : corpora) {
        fs::path p = dir / c.file;
        if (!fs::exists(p)) continue;
        any = true;
        data::LoadReport rep = data::load_csv(p.string(), "Label", c.bot_labels);
        bool match = rep.n_normal == c.normal && rep.n_bot == c.bot;
        if (!match) ok = false;
        detail << c.file << " " << rep.n_normal << "/" << rep.n_bot
               << (match ? " ok; " : " MISMATCH; ");
    }
    if (!any) {
        report_skip(10, "real-corpora ingestion",
                    "no corpora under " + dir.string() +
                        " (set RELEVAGAN_DATA_DIR); counts not checked");
        return;
    }
    report(10, "real-corpora ingestion", ok, detail.str());
}

}  // namespace

int main() {
    fs::path out_root = fs::temp_directory_path() / "relevagan-acceptance";
    fs::remove_all(out_root);
    fs::create_directories(out_root);

    criterion_gradients();
    criterion_oracles();
    criterion_deltas();

    std::printf("-- training fixture run pool (this is the slow part) --\n");
    std::fflush(stdout);
    Pool pool = run_pool(out_root);

    criterion_perturbations(pool);
    criterion_convergence(pool);
    criterion_dieoff(pool);
    criterion_earlier(pool);
    criterion_timing(pool);
    criterion_determinism(out_root);
    criterion_ingestion();

    std::printf("%d criterion failure(s)\n", g_failures);
    return g_failures;
}
