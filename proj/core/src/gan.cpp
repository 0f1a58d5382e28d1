#include "relevagan/gan.hpp"

#include <filesystem>
#include <random>
#include <stdexcept>

#include "relevagan/checkpoint.hpp"

namespace relevagan::gan {

using nn::Activation;
using nn::AdamState;
using nn::Mode;
using nn::Network;

namespace {

Network build_generator_net(std::size_t noise_dim, std::size_t feature_dim,
                            const GanConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Network net;
    std::size_t in = noise_dim + 1;  // minority label appended to the noise
    for (std::size_t h : cfg.gen_hidden) {
        net.add(nn::make_dense(in, h, Activation::relu, rng));
        in = h;
    }
    net.add(nn::make_dense(in, feature_dim, Activation::sigmoid, rng));
    return net;
}

}  // namespace

Generator::Generator(std::size_t noise_dim, std::size_t feature_dim,
                     const GanConfig& cfg, std::uint64_t seed)
    : net_(build_generator_net(noise_dim, feature_dim, cfg, seed)),
      noise_dim_(noise_dim),
      opt_(net_.param_count(), cfg.learning_rate, cfg.beta1, cfg.beta2) {}

Generator::Generator(Network net, std::size_t noise_dim, const GanConfig& cfg)
    : net_(std::move(net)), noise_dim_(noise_dim),
      opt_(net_.param_count(), cfg.learning_rate, cfg.beta1, cfg.beta2) {}

Matrix Generator::generate(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("generate: n must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix z(n, noise_dim_ + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < noise_dim_; ++j) z(i, j) = g(rng);
        z(i, noise_dim_) = 1.0;  // minority class label
    }
    Mode saved = net_.mode();
    net_.set_mode(Mode::inference);
    Matrix out = net_.forward(z);
    net_.set_mode(saved);
    return out;
}

TwoHeadDiscriminator::TwoHeadDiscriminator(std::size_t feature_dim,
                                           const GanConfig& cfg, std::uint64_t seed)
    : opt_() {
    std::mt19937_64 rng(seed);
    std::size_t in = feature_dim;
    for (std::size_t h : cfg.trunk_hidden) {
        trunk_.add(nn::make_dense(in, h, Activation::relu, rng));
        in = h;
    }
    src_.add(nn::make_dense(in, 1, Activation::sigmoid, rng));
    cls_.add(nn::make_dense(in, 1, Activation::sigmoid, rng));
    opt_ = AdamState(param_count(), cfg.learning_rate, cfg.beta1, cfg.beta2);
}

TwoHeadDiscriminator::TwoHeadDiscriminator(Network trunk, Network source_head,
                                           Network class_head, const GanConfig& cfg)
    : trunk_(std::move(trunk)), src_(std::move(source_head)),
      cls_(std::move(class_head)),
      opt_(param_count(), cfg.learning_rate, cfg.beta1, cfg.beta2) {}

TwoHeadDiscriminator::Scores TwoHeadDiscriminator::predict(const Matrix& batch) const {
    auto& self = const_cast<TwoHeadDiscriminator&>(*this);
    Mode mt = trunk_.mode(), ms = src_.mode(), mc = cls_.mode();
    self.trunk_.set_mode(Mode::inference);
    self.src_.set_mode(Mode::inference);
    self.cls_.set_mode(Mode::inference);
    Matrix h = self.trunk_.forward(batch);
    Matrix s = self.src_.forward(h);
    Matrix c = self.cls_.forward(h);
    self.trunk_.set_mode(mt);
    self.src_.set_mode(ms);
    self.cls_.set_mode(mc);
    Scores out;
    out.source.assign(s.data.begin(), s.data.end());
    out.cls.assign(c.data.begin(), c.data.end());
    return out;
}

double TwoHeadDiscriminator::class_prob(std::span<const double> sample) const {
    Matrix m(1, sample.size());
    std::copy(sample.begin(), sample.end(), m.data.begin());
    return predict(m).cls[0];
}

std::vector<double> TwoHeadDiscriminator::flat_params() const {
    std::vector<double> p = trunk_.flat_params();
    std::vector<double> s = src_.flat_params();
    std::vector<double> c = cls_.flat_params();
    p.insert(p.end(), s.begin(), s.end());
    p.insert(p.end(), c.begin(), c.end());
    return p;
}

void TwoHeadDiscriminator::set_flat_params(std::span<const double> p) {
    std::size_t nt = trunk_.param_count(), ns = src_.param_count(),
                nc = cls_.param_count();
    if (p.size() != nt + ns + nc)
        throw std::invalid_argument("discriminator set_flat_params: size mismatch");
    trunk_.set_flat_params(p.subspan(0, nt));
    src_.set_flat_params(p.subspan(nt, ns));
    cls_.set_flat_params(p.subspan(nt + ns, nc));
}

std::size_t TwoHeadDiscriminator::param_count() const {
    return trunk_.param_count() + src_.param_count() + cls_.param_count();
}

TwoHeadDiscriminator::TermResult TwoHeadDiscriminator::train_term(
    const Matrix& batch, std::optional<double> source_target,
    std::optional<double> class_target, std::span<double> param_grads) {
    if (batch.rows == 0) throw std::invalid_argument("train_term: empty batch");
    if (param_grads.size() != param_count())
        throw std::invalid_argument("train_term: grad buffer size mismatch");

    trunk_.set_mode(Mode::training);
    src_.set_mode(Mode::training);
    cls_.set_mode(Mode::training);

    const std::size_t n = batch.rows;
    Matrix h = trunk_.forward(batch);
    Matrix s = src_.forward(h);
    Matrix c = cls_.forward(h);

    TermResult r;
    r.source.assign(s.data.begin(), s.data.end());
    r.cls.assign(c.data.begin(), c.data.end());

    const std::size_t nt = trunk_.param_count(), ns = src_.param_count(),
                      nc = cls_.param_count();
    Matrix dh(n, h.cols, 0.0);

    if (source_target) {
        std::vector<double> target(n, *source_target);
        nn::BceResult b = nn::bce(r.source, target);
        r.source_loss = b.loss;
        Matrix ds(n, 1);
        ds.data = b.grad;
        Network::Gradients hg = src_.backward(ds);
        for (std::size_t i = 0; i < ns; ++i) param_grads[nt + i] += hg.params[i];
        for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += hg.input.data[i];
    }
    if (class_target) {
        std::vector<double> target(n, *class_target);
        nn::BceResult b = nn::bce(r.cls, target);
        r.class_loss = b.loss;
        Matrix dc(n, 1);
        dc.data = b.grad;
        Network::Gradients hg = cls_.backward(dc);
        for (std::size_t i = 0; i < nc; ++i) param_grads[nt + ns + i] += hg.params[i];
        for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += hg.input.data[i];
    }

    Network::Gradients tg = trunk_.backward(dh);
    for (std::size_t i = 0; i < nt; ++i) param_grads[i] += tg.params[i];
    r.input_grad = std::move(tg.input);
    return r;
}

namespace {

void apply_adam(TwoHeadDiscriminator& d, std::span<const double> grads) {
    nn::adam_step_networks({&d.trunk(), &d.source_head(), &d.class_head()}, grads,
                           d.optimizer());
}

}  // namespace

RealLoss d_step_real(TwoHeadDiscriminator& d, const Matrix& normal_batch,
                     const Matrix& bot_batch, bool source_on_majority) {
    if (normal_batch.rows == 0 || bot_batch.rows == 0)
        throw std::invalid_argument("d_step_real: empty batch");
    std::vector<double> grads(d.param_count(), 0.0);
    auto on_normal = d.train_term(normal_batch,
                                  source_on_majority ? std::optional<double>(1.0)
                                                     : std::nullopt,
                                  1.0, grads);
    auto on_bot = d.train_term(bot_batch, 1.0, 0.0, grads);
    apply_adam(d, grads);
    return {on_normal.class_loss, on_bot.source_loss, on_bot.class_loss};
}

FakeLoss d_step_fake(TwoHeadDiscriminator& d, const Matrix& generated_batch) {
    if (generated_batch.rows == 0)
        throw std::invalid_argument("d_step_fake: empty batch");
    std::vector<double> grads(d.param_count(), 0.0);
    auto t = d.train_term(generated_batch, 0.0, 0.0, grads);
    apply_adam(d, grads);
    return {t.source_loss, t.class_loss};
}

EvasionLoss d_step_evasions(TwoHeadDiscriminator& d, const Matrix& evasion_batch) {
    if (evasion_batch.rows == 0) return {0.0, true};
    std::vector<double> grads(d.param_count(), 0.0);
    auto t = d.train_term(evasion_batch, 1.0, 0.0, grads);
    apply_adam(d, grads);
    return {t.source_loss + t.class_loss, false};
}

namespace {

double generator_update(Generator& gen, TwoHeadDiscriminator& d,
                        std::size_t batch_size, std::uint64_t seed) {
    if (batch_size == 0) throw std::invalid_argument("g_step: empty batch");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix z(batch_size, gen.noise_dim() + 1);
    for (std::size_t i = 0; i < batch_size; ++i) {
        for (std::size_t j = 0; j < gen.noise_dim(); ++j) z(i, j) = g(rng);
        z(i, gen.noise_dim()) = 1.0;
    }
    gen.network().set_mode(Mode::training);
    Matrix fake = gen.network().forward(z);

    // Gradients flow through D but only G's parameters update.
    std::vector<double> d_grads(d.param_count(), 0.0);
    auto t = d.train_term(fake, 1.0, 0.0, d_grads);

    Network::Gradients gg = gen.network().backward(t.input_grad);
    nn::adam_step_networks({&gen.network()}, gg.params, gen.optimizer());
    return t.source_loss + t.class_loss;
}

}  // namespace

double g_step(Generator& gen, TwoHeadDiscriminator& d, std::size_t batch_size,
              std::uint64_t seed) {
    return generator_update(gen, d, batch_size, seed);
}

AcganDLoss acgan_d_step(TwoHeadDiscriminator& d, const Matrix& normal_batch,
                        const Matrix& bot_batch, const Matrix& fake_batch) {
    if (normal_batch.rows == 0 || bot_batch.rows == 0 || fake_batch.rows == 0)
        throw std::invalid_argument("acgan_d_step: empty batch");
    std::vector<double> grads(d.param_count(), 0.0);
    auto on_normal = d.train_term(normal_batch, 1.0, 1.0, grads);
    auto on_bot = d.train_term(bot_batch, 1.0, 0.0, grads);
    auto on_fake = d.train_term(fake_batch, 0.0, 0.0, grads);
    apply_adam(d, grads);
    // Report the real-side terms as row-weighted means so each BCE term
    // reads on the same per-row scale as the fake side.
    const double wn = static_cast<double>(normal_batch.rows);
    const double wb = static_cast<double>(bot_batch.rows);
    return {(wn * on_normal.source_loss + wb * on_bot.source_loss) / (wn + wb),
            on_fake.source_loss,
            (wn * on_normal.class_loss + wb * on_bot.class_loss) / (wn + wb),
            on_fake.class_loss};
}

double acgan_g_step(Generator& gen, TwoHeadDiscriminator& d, std::size_t batch_size,
                    std::uint64_t seed) {
    return generator_update(gen, d, batch_size, seed);
}

Generator make_generator(std::size_t noise_dim, std::size_t feature_dim,
                         const GanConfig& cfg, std::uint64_t seed) {
    return Generator(noise_dim, feature_dim, cfg, seed);
}

TwoHeadDiscriminator make_discriminator(std::size_t feature_dim, const GanConfig& cfg,
                                        std::uint64_t seed) {
    return TwoHeadDiscriminator(feature_dim, cfg, seed);
}

void save_discriminator(const TwoHeadDiscriminator& d, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nn::save_network_file(d.trunk(), dir + "/trunk.net");
    nn::save_network_file(d.source_head(), dir + "/source_head.net");
    nn::save_network_file(d.class_head(), dir + "/class_head.net");
}

TwoHeadDiscriminator load_discriminator(const std::string& dir, const GanConfig& cfg) {
    return TwoHeadDiscriminator(nn::load_network_file(dir + "/trunk.net"),
                                nn::load_network_file(dir + "/source_head.net"),
                                nn::load_network_file(dir + "/class_head.net"), cfg);
}

void save_generator(const Generator& g, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nn::save_network_file(g.network(), dir + "/generator.net");
}

Generator load_generator(const std::string& dir, const GanConfig& cfg) {
    nn::Network net = nn::load_network_file(dir + "/generator.net");
    std::size_t noise_dim = net.input_width() - 1;
    return Generator(std::move(net), noise_dim, cfg);
}

}  // namespace relevagan::gan
