#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "relevagan/nn.hpp"

namespace relevagan::gan {

struct GanConfig {
    std::size_t noise_dim = 32;
    std::size_t batch_size = 256;
    std::size_t epochs = 150;
    std::vector<std::size_t> gen_hidden = {64, 128};
    std::vector<std::size_t> trunk_hidden = {128, 64};
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    // The canonical real-side loss has no source term on majority rows;
    // flag kept for the variant that adds one.
    bool source_on_majority = false;
    std::uint64_t seed = 0;
};

/// Conditional generator: standard-normal noise plus the constant minority
/// label 1 in, sigmoid-bounded feature vectors out.
class Generator {
  public:
    Generator(std::size_t noise_dim, std::size_t feature_dim, const GanConfig& cfg,
              std::uint64_t seed);
    Generator(nn::Network net, std::size_t noise_dim, const GanConfig& cfg);

    Matrix generate(std::size_t n, std::uint64_t seed);

    std::size_t noise_dim() const { return noise_dim_; }
    std::size_t feature_dim() const { return net_.output_width(); }
    nn::Network& network() { return net_; }
    const nn::Network& network() const { return net_; }
    nn::AdamState& optimizer() { return opt_; }

  private:
    nn::Network net_;
    std::size_t noise_dim_;
    nn::AdamState opt_;
};

/// Shared trunk with a source head S = P(real | x) and a class head
/// C = P(normal | x); the class head is the botnet detector output.
class TwoHeadDiscriminator {
  public:
    TwoHeadDiscriminator(std::size_t feature_dim, const GanConfig& cfg,
                         std::uint64_t seed);
    TwoHeadDiscriminator(nn::Network trunk, nn::Network source_head,
                         nn::Network class_head, const GanConfig& cfg);

    struct Scores {
        std::vector<double> source;  // S per row
        std::vector<double> cls;     // C per row
    };

    /// Inference pass; does not touch training caches.
    Scores predict(const Matrix& batch) const;

    /// Class-head probability for a single sample.
    double class_prob(std::span<const double> sample) const;

    std::size_t feature_dim() const { return trunk_.input_width(); }

    nn::Network& trunk() { return trunk_; }
    nn::Network& source_head() { return src_; }
    nn::Network& class_head() { return cls_; }
    const nn::Network& trunk() const { return trunk_; }
    const nn::Network& source_head() const { return src_; }
    const nn::Network& class_head() const { return cls_; }

    std::vector<double> flat_params() const;
    void set_flat_params(std::span<const double> p);
    std::size_t param_count() const;
    nn::AdamState& optimizer() { return opt_; }

    struct TermResult {
        std::vector<double> source;  // S per row (training-mode pass)
        std::vector<double> cls;     // C per row
        double source_loss = 0.0;
        double class_loss = 0.0;
        Matrix input_grad;
    };

    /// One training-mode pass with BCE terms toward the given constant
    /// targets (either may be unset to skip that head). Adds parameter
    /// gradients into param_grads and returns dLoss/dInput.
    TermResult train_term(const Matrix& batch, std::optional<double> source_target,
                          std::optional<double> class_target,
                          std::span<double> param_grads);

  private:
    nn::Network trunk_;
    nn::Network src_;
    nn::Network cls_;
    nn::AdamState opt_;
};

struct RealLoss {
    double class_on_normal = 0.0;  // majority-class estimation term
    double source_on_bot = 0.0;    // source term on real minority rows
    double class_on_bot = 0.0;     // minority-class estimation term
    double total() const { return class_on_normal + source_on_bot + class_on_bot; }
};

struct FakeLoss {
    double source = 0.0;
    double cls = 0.0;
    double total() const { return source + cls; }
};

struct GanLossReport {
    double d_loss_real = 0.0;
    double d_loss_fake = 0.0;
    double d_loss_normal = 0.0;
    double g_loss = 0.0;
};

/// One optimizer update of D on real rows: class head toward normal on the
/// majority batch, source head toward real and class head toward bot on the
/// minority batch.
RealLoss d_step_real(TwoHeadDiscriminator& d, const Matrix& normal_batch,
                     const Matrix& bot_batch, bool source_on_majority = false);

/// One optimizer update of D on generated rows: source toward fake, class
/// toward bot.
FakeLoss d_step_fake(TwoHeadDiscriminator& d, const Matrix& generated_batch);

/// One optimizer update of D on agent evasions, labelled real source / bot
/// class. Empty input is a recorded no-op.
struct EvasionLoss {
    double loss = 0.0;
    bool skipped = false;
};
EvasionLoss d_step_evasions(TwoHeadDiscriminator& d, const Matrix& evasion_batch);

/// One optimizer update of G through a frozen D: source toward real plus
/// class toward bot on freshly generated rows.
double g_step(Generator& gen, TwoHeadDiscriminator& d, std::size_t batch_size,
              std::uint64_t seed);

struct AcganDLoss {
    double source_real = 0.0;
    double source_fake = 0.0;
    double class_real = 0.0;
    double class_fake = 0.0;
    double total() const { return source_real + source_fake + class_real + class_fake; }
};

/// ACGAN baseline D update: source BCE real-vs-fake plus class BCE on both
/// real and generated rows.
AcganDLoss acgan_d_step(TwoHeadDiscriminator& d, const Matrix& normal_batch,
                        const Matrix& bot_batch, const Matrix& fake_batch);

/// ACGAN baseline G update: source-fooling plus class-correctness.
double acgan_g_step(Generator& gen, TwoHeadDiscriminator& d, std::size_t batch_size,
                    std::uint64_t seed);

Generator make_generator(std::size_t noise_dim, std::size_t feature_dim,
                         const GanConfig& cfg, std::uint64_t seed);
TwoHeadDiscriminator make_discriminator(std::size_t feature_dim, const GanConfig& cfg,
                                        std::uint64_t seed);

void save_discriminator(const TwoHeadDiscriminator& d, const std::string& dir);
TwoHeadDiscriminator load_discriminator(const std::string& dir, const GanConfig& cfg);
void save_generator(const Generator& g, const std::string& dir);
Generator load_generator(const std::string& dir, const GanConfig& cfg);

}  // namespace relevagan::gan
