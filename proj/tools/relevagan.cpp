// Command-line front end: train / evaluate / synth-data / compare.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 runtime failure.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "relevagan/data.hpp"
#include "relevagan/harness.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

int run_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    relevagan::harness::ExperimentConfig cfg =
        relevagan::harness::load_config(config_path);
    for (const auto& ov : overrides) {
        std::size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--set expects key=value, got '" + ov + "'");
        relevagan::harness::apply_config_line(cfg, ov.substr(0, eq), ov.substr(eq + 1));
    }
    relevagan::harness::RunArtifacts art = relevagan::harness::train(cfg);
    std::printf("model=%s epochs=%zu evasions=%zu convergence_epoch=%s out=%s\n",
                relevagan::harness::to_string(cfg.model).c_str(), art.records.size(),
                [&] {
                    std::size_t n = 0;
                    for (const auto& r : art.records) n += r.evasions;
                    return n;
                }(),
                art.convergence_epoch ? std::to_string(*art.convergence_epoch).c_str()
                                      : "none",
                cfg.out_dir.c_str());
    return 0;
}

int run_evaluate(const std::string& checkpoint_dir, const std::string& dataset_path,
                 const std::string& label_column, std::uint64_t seed) {
    namespace rg = relevagan;
    rg::gan::GanConfig gcfg;
    rg::gan::TwoHeadDiscriminator d =
        rg::gan::load_discriminator(checkpoint_dir + "/checkpoint", gcfg);
    rg::gan::Generator g =
        rg::gan::load_generator(checkpoint_dir + "/checkpoint", gcfg);
    std::set<std::string> bots = {"bot", "Virut", "Ares", "Zeus", "Botnet"};
    rg::data::LoadReport rep = rg::data::load_csv(dataset_path, label_column, bots);
    rg::data::ScalerParams scaler = rg::data::load_scaler(checkpoint_dir + "/scaler.txt");
    rg::data::FlowDataset scaled = rg::data::apply_scaler(rep.dataset, scaler);
    rg::Matrix normal = rg::data::sample_batch(scaled, rg::data::Label::normal,
                                               rep.n_normal, 0, false);
    rg::Matrix bot =
        rg::data::sample_batch(scaled, rg::data::Label::bot, rep.n_bot, 0, false);
    rg::harness::Estimations e =
        rg::harness::evaluate_estimations(d, g, normal, bot, 256, seed);
    std::printf("gen_validity=%.6f fake_bot_eva=%.6f real_normal_est=%.6f "
                "real_bot_eva=%.6f (normal=%zu bot=%zu dropped=%zu)\n",
                e.gen_validity, e.fake_bot_eva, e.real_normal_est, e.real_bot_eva,
                rep.n_normal, rep.n_bot, rep.dropped_rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RELEVAGAN: evasion-aware botnet-detection GAN with a DRL attacker"};
    app.require_subcommand(1);

    auto* train_cmd = app.add_subcommand("train", "Run a training experiment");
    std::string config_path;
    std::vector<std::string> overrides;
    train_cmd->add_option("--config", config_path, "Experiment config file")->required();
    train_cmd->add_option("--set", overrides,
                          "Override a config key (key=value), repeatable");
    std::optional<std::string> ov_model, ov_dataset, ov_out;
    std::optional<std::uint64_t> ov_epochs, ov_seed;
    train_cmd->add_option("--model", ov_model, "Model: relevagan|evagan|acgan");
    train_cmd->add_option("--dataset", ov_dataset, "Dataset CSV path");
    train_cmd->add_option("--epochs", ov_epochs, "Number of epochs");
    train_cmd->add_option("--seed", ov_seed, "Run seed");
    train_cmd->add_option("--out", ov_out, "Output directory");

    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate saved checkpoints");
    std::string ckpt_dir, eval_dataset, eval_label = "Label";
    std::uint64_t eval_seed = 0;
    eval_cmd->add_option("--checkpoint", ckpt_dir, "Run directory with checkpoints")
        ->required();
    eval_cmd->add_option("--dataset", eval_dataset, "Dataset CSV path")->required();
    eval_cmd->add_option("--label-column", eval_label, "Label column name");
    eval_cmd->add_option("--seed", eval_seed, "Generation seed");

    auto* synth_cmd = app.add_subcommand("synth-data", "Write a synthetic fixture CSV");
    std::size_t s_normal = 1000, s_bot = 50, s_features = 16;
    double s_sep = 4.0;
    std::uint64_t s_seed = 0;
    std::string s_out;
    synth_cmd->add_option("--normal", s_normal, "Normal sample count");
    synth_cmd->add_option("--bot", s_bot, "Bot sample count");
    synth_cmd->add_option("--features", s_features, "Feature count (>= 13)");
    synth_cmd->add_option("--sep", s_sep, "Cluster separation");
    synth_cmd->add_option("--seed", s_seed, "Seed");
    synth_cmd->add_option("--out", s_out, "Output CSV path")->required();

    auto* compare_cmd = app.add_subcommand("compare", "Compare completed runs");
    std::vector<std::string> run_dirs;
    compare_cmd->add_option("runs", run_dirs, "Run directories")->expected(-1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*train_cmd) {
            if (ov_model) overrides.push_back("model=" + *ov_model);
            if (ov_dataset) overrides.push_back("dataset=" + *ov_dataset);
            if (ov_epochs) overrides.push_back("epochs=" + std::to_string(*ov_epochs));
            if (ov_seed) overrides.push_back("seed=" + std::to_string(*ov_seed));
            if (ov_out) overrides.push_back("out=" + *ov_out);
            return run_train(config_path, overrides);
        }
        if (*eval_cmd) return run_evaluate(ckpt_dir, eval_dataset, eval_label, eval_seed);
        if (*synth_cmd) {
            relevagan::data::FlowDataset ds = relevagan::data::synth_fixture(
                s_normal, s_bot, s_features, s_sep, s_seed);
            relevagan::data::save_csv(ds, s_out);
            std::printf("wrote %zu rows x %zu features to %s\n", ds.X.rows, ds.X.cols,
                        s_out.c_str());
            return 0;
        }
        if (*compare_cmd) {
            relevagan::harness::ComparisonReport rep =
                relevagan::harness::compare(run_dirs);
            std::fputs(rep.text.c_str(), stdout);
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::runtime_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
