#include "relevagan/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace relevagan::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(ModelKind m) {
    switch (m) {
        case ModelKind::relevagan: return "relevagan";
        case ModelKind::evagan: return "evagan";
        case ModelKind::acgan: return "acgan";
    }
    return "relevagan";
}

ModelKind model_from_string(const std::string& s) {
    if (s == "relevagan") return ModelKind::relevagan;
    if (s == "evagan") return ModelKind::evagan;
    if (s == "acgan") return ModelKind::acgan;
    throw std::invalid_argument("unknown model '" + s + "' (expected relevagan|evagan|acgan)");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return splitmix64(base * 0x100000001b3ULL + tag);
}

Matrix rows_of_class(const data::FlowDataset& ds, data::Label l) {
    std::vector<std::size_t> idx = ds.indices(l);
    Matrix out(idx.size(), ds.X.cols);
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(ds.X.row(idx[r]).begin(), ds.X.cols, out.row(r).begin());
    return out;
}

double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string dataset_id(const ExperimentConfig& c) {
    if (!c.dataset_path.empty()) return c.dataset_path;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "synth_fixture(%zu,%zu,%zu,%g)", c.fixture_normal,
                  c.fixture_bot, c.fixture_features, c.fixture_separation);
    return buf;
}

}  // namespace

Estimations evaluate_estimations(const gan::TwoHeadDiscriminator& d,
                                 gan::Generator& gen, const Matrix& test_normal,
                                 const Matrix& test_bot, std::size_t n_gen,
                                 std::uint64_t seed) {
    if (test_normal.rows == 0 || test_bot.rows == 0)
        throw std::invalid_argument("evaluate_estimations: empty test set");
    if (n_gen == 0) throw std::invalid_argument("evaluate_estimations: n_gen must be >= 1");
    Matrix generated = gen.generate(n_gen, seed);
    auto gen_scores = d.predict(generated);
    Estimations e;
    e.gen_validity = mean(gen_scores.source);
    e.fake_bot_eva = mean(gen_scores.cls);
    e.real_normal_est = mean(d.predict(test_normal).cls);
    e.real_bot_eva = mean(d.predict(test_bot).cls);
    return e;
}

std::optional<std::size_t> convergence_epoch(const std::vector<EpochRecord>& records,
                                             double tol, double tol_v) {
    for (const auto& r : records) {
        if (std::abs(r.gen_validity - 1.0) <= tol_v && r.fake_bot_eva <= tol &&
            std::abs(r.real_normal_est - 1.0) <= tol && r.real_bot_eva <= tol)
            return r.epoch;
    }
    return std::nullopt;
}

const char* kEpochsCsvHeader =
    "epoch,d_loss_real,d_loss_fake,d_loss_normal,g_loss,gen_validity,fake_bot_eva,"
    "real_normal_est,real_bot_eva,evasions,seconds";

std::string format_epoch_row(const EpochRecord& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%.6f", r.epoch,
                  r.d_loss_real, r.d_loss_fake, r.d_loss_normal, r.g_loss,
                  r.gen_validity, r.fake_bot_eva, r.real_normal_est, r.real_bot_eva,
                  r.evasions, r.seconds);
    return buf;
}

namespace {

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["model"] = to_string(c.model);
    j["dataset"] = dataset_id(c);
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["train_fraction"] = c.train_fraction;
    j["eval_gen_rows"] = c.eval_gen_rows;
    j["tol"] = c.tol;
    j["tol_v"] = c.tol_v;
    j["seed"] = c.seed;
    j["noise_dim"] = c.gan.noise_dim;
    j["gan_lr"] = c.gan.learning_rate;
    j["gan_beta1"] = c.gan.beta1;
    j["source_on_majority"] = c.gan.source_on_majority;
    j["rounds"] = c.drl.rounds;
    j["max_turns"] = c.drl.max_turns;
    j["gamma"] = c.drl.gamma;
    j["temperature"] = c.drl.temperature;
    j["target_tau"] = c.drl.target_tau;
    j["replay_capacity"] = c.drl.replay_capacity;
    j["warmup"] = c.drl.warmup;
    j["minibatch"] = c.drl.minibatch;
    j["train_every"] = c.drl.train_every;
    j["dqn_lr"] = c.drl.learning_rate;
    j["deterministic_seconds"] = c.deterministic_seconds;
    return j;
}

}  // namespace

void write_run_json(const RunArtifacts& art, const std::string& path) {
    json j;
    j["config"] = config_to_json(art.config);
    j["seed"] = art.config.seed;
    j["model"] = to_string(art.config.model);
    j["dataset"] = dataset_id(art.config);
    j["epochs_completed"] = art.records.size();
    if (art.convergence_epoch) j["convergence_epoch"] = *art.convergence_epoch;
    else j["convergence_epoch"] = nullptr;
    j["total_seconds"] = art.total_seconds;
    j["total_train_seconds"] = art.total_train_seconds;
    std::size_t total_evasions = 0;
    for (const auto& r : art.records) total_evasions += r.evasions;
    j["total_evasions"] = total_evasions;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

RunArtifacts train(const ExperimentConfig& config) {
    using clock = std::chrono::steady_clock;
    RunArtifacts art;
    art.config = config;

    // Data preparation: split first, fit the scaler on the training split.
    data::FlowDataset raw;
    if (!config.dataset_path.empty()) {
        std::set<std::string> bots(config.bot_labels.begin(), config.bot_labels.end());
        raw = data::load_csv(config.dataset_path, config.label_column, bots).dataset;
    } else {
        raw = data::synth_fixture(config.fixture_normal, config.fixture_bot,
                                  config.fixture_features, config.fixture_separation,
                                  derive_seed(config.seed, 1));
    }
    data::Split sp = data::split(raw, config.train_fraction, derive_seed(config.seed, 2));
    data::ScalerParams scaler = data::fit_scaler(sp.train);
    data::FlowDataset train_ds = data::apply_scaler(sp.train, scaler);
    data::FlowDataset test_ds = data::apply_scaler(sp.test, scaler);
    data::ActionFeatureMap action_map = data::make_action_map(train_ds);
    data::DeltaVector deltas = data::compute_deltas(train_ds, action_map);
    art.deltas = deltas;
    art.action_map = action_map;

    Matrix test_normal = rows_of_class(test_ds, data::Label::normal);
    Matrix test_bot = rows_of_class(test_ds, data::Label::bot);
    std::vector<std::size_t> normal_train = train_ds.indices(data::Label::normal);

    const std::size_t features = train_ds.X.cols;

    gan::GanConfig gcfg = config.gan;
    gcfg.batch_size = config.batch_size;
    gcfg.epochs = config.epochs;
    gan::Generator gen(gcfg.noise_dim, features, gcfg, derive_seed(config.seed, 3));
    gan::TwoHeadDiscriminator disc(features, gcfg, derive_seed(config.seed, 4));

    drl::DrlConfig dcfg = config.drl;
    dcfg.seed = derive_seed(config.seed, 5);
    std::optional<drl::DqnAgent> agent;
    std::optional<drl::EvasionEnv> env;
    if (config.model == ModelKind::relevagan) {
        agent.emplace(features, dcfg);
        drl::DetectorFn detector;
        if (config.debug_force_c) {
            double c = *config.debug_force_c;
            detector = [c](std::span<const double>) { return c; };
        } else {
            detector = [&disc](std::span<const double> s) { return disc.class_prob(s); };
        }
        env.emplace(deltas, action_map, detector, dcfg.max_turns);
    }

    fs::create_directories(config.out_dir);
    std::ofstream csv(config.out_dir + "/epochs.csv");
    if (!csv) throw std::runtime_error("cannot write epoch log in " + config.out_dir);
    csv << kEpochsCsvHeader << "\n" << std::flush;
    data::save_scaler(scaler, config.out_dir + "/scaler.txt");

    std::mt19937_64 shuffle_rng(derive_seed(config.seed, 6));
    const std::uint64_t eval_seed = derive_seed(config.seed, 7);
    const std::size_t batches =
        (normal_train.size() + config.batch_size - 1) / config.batch_size;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        auto epoch_start = clock::now();
        std::shuffle(normal_train.begin(), normal_train.end(), shuffle_rng);

        double sum_real = 0.0, sum_fake = 0.0, sum_normal = 0.0, sum_g = 0.0;
        std::size_t epoch_evasions = 0;

        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t lo = b * config.batch_size;
            const std::size_t hi = std::min(lo + config.batch_size, normal_train.size());
            Matrix normal_batch(hi - lo, features);
            for (std::size_t r = lo; r < hi; ++r)
                std::copy_n(train_ds.X.row(normal_train[r]).begin(), features,
                            normal_batch.row(r - lo).begin());
            const std::uint64_t bseed = derive_seed(config.seed, epoch * 100000 + b);
            Matrix bot_batch = data::sample_batch(train_ds, data::Label::bot,
                                                  config.batch_size,
                                                  derive_seed(bseed, 11), true);
            std::vector<int> audit;

            if (config.model == ModelKind::acgan) {
                Matrix fake = gen.generate(config.batch_size, derive_seed(bseed, 12));
                gan::AcganDLoss dl = gan::acgan_d_step(disc, normal_batch, bot_batch, fake);
                audit.push_back(1);
                audit.push_back(2);
                sum_real += dl.source_real;
                sum_fake += dl.source_fake + dl.class_fake;
                sum_normal += dl.class_real;
                sum_g += gan::acgan_g_step(gen, disc, config.batch_size,
                                           derive_seed(bseed, 13));
                audit.push_back(5);
            } else {
                gan::RealLoss rl = gan::d_step_real(disc, normal_batch, bot_batch,
                                                    gcfg.source_on_majority);
                audit.push_back(1);
                Matrix fake = gen.generate(config.batch_size, derive_seed(bseed, 12));
                gan::FakeLoss fl = gan::d_step_fake(disc, fake);
                audit.push_back(2);
                sum_real += rl.source_on_bot + rl.class_on_bot;
                sum_fake += fl.total();
                sum_normal += rl.class_on_normal;

                if (config.model == ModelKind::relevagan) {
                    drl::AttackSessionReport rep =
                        drl::run_attack_session(*agent, *env, bot_batch, dcfg.rounds);
                    audit.push_back(3);
                    epoch_evasions += rep.evasion_count;
                    for (std::size_t i = 0; i < rep.evasions.size(); ++i)
                        art.evasion_audit.push_back({rep.evasion_seeds[i], rep.evasions[i]});
                    Matrix evasions(rep.evasions.size(), features);
                    for (std::size_t i = 0; i < rep.evasions.size(); ++i)
                        std::copy_n(rep.evasions[i].begin(), features,
                                    evasions.row(i).begin());
                    gan::d_step_evasions(disc, evasions);
                    audit.push_back(4);
                }

                sum_g += gan::g_step(gen, disc, config.batch_size, derive_seed(bseed, 13));
                audit.push_back(5);
            }
            if (config.debug_audit) art.step_audit.push_back(std::move(audit));
        }

        auto train_end = clock::now();
        Estimations est = evaluate_estimations(disc, gen, test_normal, test_bot,
                                               config.eval_gen_rows, eval_seed);
        auto epoch_end = clock::now();

        const double db = static_cast<double>(batches);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.d_loss_real = sum_real / db;
        rec.d_loss_fake = sum_fake / db;
        rec.d_loss_normal = sum_normal / db;
        rec.g_loss = sum_g / db;
        rec.gen_validity = est.gen_validity;
        rec.fake_bot_eva = est.fake_bot_eva;
        rec.real_normal_est = est.real_normal_est;
        rec.real_bot_eva = est.real_bot_eva;
        rec.evasions = epoch_evasions;

        const double train_s =
            std::chrono::duration<double>(train_end - epoch_start).count();
        const double full_s =
            std::chrono::duration<double>(epoch_end - epoch_start).count();
        rec.seconds = config.deterministic_seconds
                          ? 0.001
                          : std::max(0.001, std::round(full_s * 1000.0) / 1000.0);
        art.total_seconds += full_s;
        art.total_train_seconds += train_s;

        art.records.push_back(rec);
        csv << format_epoch_row(rec) << "\n" << std::flush;

        if (config.early_stop_detection &&
            rec.real_normal_est >= 1.0 - config.tol && rec.real_bot_eva <= config.tol &&
            rec.fake_bot_eva <= config.tol)
            break;
    }

    art.convergence_epoch = convergence_epoch(art.records, config.tol, config.tol_v);
    gan::save_generator(gen, config.out_dir + "/checkpoint");
    gan::save_discriminator(disc, config.out_dir + "/checkpoint");
    write_run_json(art, config.out_dir + "/run.json");
    return art;
}

std::vector<EpochRecord> read_epochs_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty epoch log: " + path);
    std::vector<EpochRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EpochRecord r;
        unsigned long epoch = 0, evasions = 0;
        if (std::sscanf(line.c_str(), "%lu,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lu,%lf",
                        &epoch, &r.d_loss_real, &r.d_loss_fake, &r.d_loss_normal,
                        &r.g_loss, &r.gen_validity, &r.fake_bot_eva,
                        &r.real_normal_est, &r.real_bot_eva, &evasions,
                        &r.seconds) != 11)
            throw std::runtime_error("malformed epoch row in " + path + ": " + line);
        r.epoch = epoch;
        r.evasions = evasions;
        out.push_back(r);
    }
    return out;
}

RunSummary read_run_summary(const std::string& dir) {
    std::ifstream in(dir + "/run.json");
    if (!in) throw std::runtime_error("not a run directory (missing run.json): " + dir);
    json j = json::parse(in);
    RunSummary s;
    s.dir = dir;
    s.model = j.at("model").get<std::string>();
    s.dataset = j.at("dataset").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("convergence_epoch").is_null())
        s.convergence_epoch = j.at("convergence_epoch").get<std::size_t>();
    s.total_seconds = j.at("total_seconds").get<double>();
    std::vector<EpochRecord> recs = read_epochs_csv(dir + "/epochs.csv");
    if (recs.empty()) throw std::runtime_error("no epochs recorded in " + dir);
    s.final_record = recs.back();
    return s;
}

ComparisonReport compare(const std::vector<std::string>& run_dirs) {
    if (run_dirs.size() < 2)
        throw std::invalid_argument("compare: need >=2 runs, got " +
                                    std::to_string(run_dirs.size()));
    ComparisonReport rep;
    for (const auto& d : run_dirs) rep.runs.push_back(read_run_summary(d));
    for (const auto& r : rep.runs)
        if (r.dataset != rep.runs.front().dataset)
            throw std::invalid_argument("compare: runs use different datasets ('" +
                                        r.dataset + "' vs '" +
                                        rep.runs.front().dataset + "')");
    auto key = [](const RunSummary& r) {
        return r.convergence_epoch ? *r.convergence_epoch
                                   : std::numeric_limits<std::size_t>::max();
    };
    std::stable_sort(rep.runs.begin(), rep.runs.end(),
                     [&](const auto& a, const auto& b) { return key(a) < key(b); });

    std::ostringstream os;
    os << "run_dir,model,seed,convergence_epoch,gen_validity,fake_bot_eva,"
          "real_normal_est,real_bot_eva,total_seconds\n";
    char buf[512];
    for (const auto& r : rep.runs) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%s,%.6f,%.6f,%.6f,%.6f,%.3f\n",
                      r.dir.c_str(), r.model.c_str(),
                      static_cast<unsigned long long>(r.seed),
                      r.convergence_epoch ? std::to_string(*r.convergence_epoch).c_str()
                                          : "none",
                      r.final_record.gen_validity, r.final_record.fake_bot_eva,
                      r.final_record.real_normal_est, r.final_record.real_bot_eva,
                      r.total_seconds);
        os << buf;
    }
    rep.text = os.str();
    return rep;
}

namespace {

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("expected boolean, got '" + v + "'");
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_line(ExperimentConfig& c, const std::string& key,
                       const std::string& value) {
    if (key == "model") c.model = model_from_string(value);
    else if (key == "dataset") c.dataset_path = value;
    else if (key == "out") c.out_dir = value;
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "epochs") c.epochs = std::stoull(value);
    else if (key == "batch_size") c.batch_size = std::stoull(value);
    else if (key == "train_fraction") c.train_fraction = std::stod(value);
    else if (key == "eval_gen_rows") c.eval_gen_rows = std::stoull(value);
    else if (key == "tol") c.tol = std::stod(value);
    else if (key == "tol_v") c.tol_v = std::stod(value);
    else if (key == "label_column") c.label_column = value;
    else if (key == "bot_labels") {
        c.bot_labels.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ',')) c.bot_labels.push_back(trim(tok));
    } else if (key == "fixture_normal") c.fixture_normal = std::stoull(value);
    else if (key == "fixture_bot") c.fixture_bot = std::stoull(value);
    else if (key == "fixture_features") c.fixture_features = std::stoull(value);
    else if (key == "fixture_separation") c.fixture_separation = std::stod(value);
    else if (key == "noise_dim") c.gan.noise_dim = std::stoull(value);
    else if (key == "gan_lr") c.gan.learning_rate = std::stod(value);
    else if (key == "gan_beta1") c.gan.beta1 = std::stod(value);
    else if (key == "gan_beta2") c.gan.beta2 = std::stod(value);
    else if (key == "source_on_majority") c.gan.source_on_majority = to_bool(value);
    else if (key == "rounds") c.drl.rounds = std::stoull(value);
    else if (key == "max_turns") c.drl.max_turns = std::stoull(value);
    else if (key == "gamma") c.drl.gamma = std::stod(value);
    else if (key == "temperature") c.drl.temperature = std::stod(value);
    else if (key == "target_tau") c.drl.target_tau = std::stod(value);
    else if (key == "replay_capacity") c.drl.replay_capacity = std::stoull(value);
    else if (key == "warmup") c.drl.warmup = std::stoull(value);
    else if (key == "minibatch") c.drl.minibatch = std::stoull(value);
    else if (key == "train_every") c.drl.train_every = std::stoull(value);
    else if (key == "dqn_lr") c.drl.learning_rate = std::stod(value);
    else if (key == "early_stop") {
        if (value == "detection") c.early_stop_detection = true;
        else if (value == "none") c.early_stop_detection = false;
        else throw std::invalid_argument("early_stop must be detection|none");
    } else if (key == "deterministic_seconds") c.deterministic_seconds = to_bool(value);
    else if (key == "debug_force_c") c.debug_force_c = std::stod(value);
    else if (key == "debug_audit") c.debug_audit = to_bool(value);
    else throw std::invalid_argument("unknown config key '" + key + "'");
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    ExperimentConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        apply_config_line(c, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return c;
}

}  // namespace relevagan::harness
