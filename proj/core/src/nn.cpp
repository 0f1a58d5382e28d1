#include "relevagan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relevagan::nn {

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::linear: return x;
    }
    return x;
}

double activation_grad(Activation a, double pre, double post) {
    switch (a) {
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return post * (1.0 - post);
        case Activation::linear: return 1.0;
    }
    return 1.0;
}

namespace {

std::size_t layer_in(const Layer& l) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) return d->in();
    if (const auto* b = std::get_if<BatchNormLayer>(&l)) return b->width();
    return 0;  // activation layer: any width
}

std::size_t layer_out(const Layer& l) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) return d->out();
    if (const auto* b = std::get_if<BatchNormLayer>(&l)) return b->width();
    return 0;
}

std::size_t layer_param_count(const Layer& l) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) return d->weights.data.size() + d->bias.size();
    if (const auto* b = std::get_if<BatchNormLayer>(&l)) return 2 * b->width();
    return 0;
}

}  // namespace

Network& Network::add(Layer layer) {
    if (!layers_.empty()) {
        std::size_t prev = output_width();
        std::size_t next = layer_in(layer);
        if (prev != 0 && next != 0 && prev != next) {
            throw std::invalid_argument("layer width mismatch: previous layer emits " +
                                        std::to_string(prev) + ", new layer expects " +
                                        std::to_string(next));
        }
    }
    layers_.push_back(std::move(layer));
    has_cache_ = false;
    return *this;
}

std::size_t Network::input_width() const {
    for (const auto& l : layers_) {
        if (std::size_t w = layer_in(l); w != 0) return w;
    }
    return 0;
}

std::size_t Network::output_width() const {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        if (std::size_t w = layer_out(*it); w != 0) return w;
    }
    return 0;
}

Matrix Network::forward(const Matrix& batch) {
    if (layers_.empty()) throw std::logic_error("forward on empty network");
    if (std::size_t w = input_width(); w != 0 && batch.cols != w) {
        throw std::invalid_argument("forward: batch width " + std::to_string(batch.cols) +
                                    " does not match network input width " + std::to_string(w));
    }
    const bool training = mode_ == Mode::training;
    if (training) cache_.assign(layers_.size(), {});

    Matrix x = batch;
    const std::size_t n = x.rows;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        Layer& layer = layers_[li];
        if (auto* d = std::get_if<DenseLayer>(&layer)) {
            Matrix z(n, d->out());
            for (std::size_t i = 0; i < n; ++i) {
                double* zi = &z.data[i * z.cols];
                for (std::size_t j = 0; j < d->out(); ++j) zi[j] = d->bias[j];
                const double* xi = &x.data[i * x.cols];
                for (std::size_t k = 0; k < d->in(); ++k) {
                    const double a = xi[k];
                    if (a == 0.0) continue;
                    const double* wk = &d->weights.data[k * d->out()];
                    for (std::size_t j = 0; j < d->out(); ++j) zi[j] += a * wk[j];
                }
            }
            Matrix y(n, d->out());
            for (std::size_t i = 0; i < z.data.size(); ++i)
                y.data[i] = apply_activation(d->activation, z.data[i]);
            if (training) {
                cache_[li].input = std::move(x);
                cache_[li].pre = std::move(z);
            }
            x = std::move(y);
        } else if (auto* b = std::get_if<BatchNormLayer>(&layer)) {
            const std::size_t w = b->width();
            Matrix xhat(n, w);
            Matrix y(n, w);
            if (training) {
                if (n == 0) throw std::invalid_argument("batchnorm on empty batch");
                std::vector<double> mean(w, 0.0), var(w, 0.0);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < w; ++j) mean[j] += x(i, j);
                for (double& m : mean) m /= static_cast<double>(n);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < w; ++j) {
                        double d2 = x(i, j) - mean[j];
                        var[j] += d2 * d2;
                    }
                for (double& v : var) v /= static_cast<double>(n);
                for (std::size_t j = 0; j < w; ++j) {
                    b->running_mean[j] = b->momentum * b->running_mean[j] +
                                         (1.0 - b->momentum) * mean[j];
                    b->running_var[j] = b->momentum * b->running_var[j] +
                                        (1.0 - b->momentum) * var[j];
                }
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < w; ++j) {
                        xhat(i, j) = (x(i, j) - mean[j]) / std::sqrt(var[j] + b->epsilon);
                        y(i, j) = b->gamma[j] * xhat(i, j) + b->beta[j];
                    }
                cache_[li].input = std::move(x);
                cache_[li].pre = std::move(xhat);
                cache_[li].mean = std::move(mean);
                cache_[li].var = std::move(var);
            } else {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < w; ++j) {
                        double h = (x(i, j) - b->running_mean[j]) /
                                   std::sqrt(b->running_var[j] + b->epsilon);
                        y(i, j) = b->gamma[j] * h + b->beta[j];
                    }
            }
            x = std::move(y);
        } else {
            auto& a = std::get<ActivationLayer>(layer);
            Matrix y(n, x.cols);
            for (std::size_t i = 0; i < x.data.size(); ++i)
                y.data[i] = apply_activation(a.activation, x.data[i]);
            if (training) cache_[li].pre = x;  // pre-activation input
            x = std::move(y);
        }
    }
    has_cache_ = training;
    return x;
}

Network::Gradients Network::backward(const Matrix& output_grad) {
    if (!has_cache_)
        throw std::logic_error("backward called without a prior training-mode forward");
    if (output_grad.cols != output_width())
        throw std::invalid_argument("backward: gradient width " +
                                    std::to_string(output_grad.cols) +
                                    " does not match output width " +
                                    std::to_string(output_width()));

    Gradients g;
    g.params.assign(param_count(), 0.0);

    // Parameter offsets, laid out front to back.
    std::vector<std::size_t> offsets(layers_.size(), 0);
    std::size_t off = 0;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        offsets[li] = off;
        off += layer_param_count(layers_[li]);
    }

    Matrix dy = output_grad;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        Layer& layer = layers_[li];
        LayerCache& c = cache_[li];
        const std::size_t n = dy.rows;
        if (auto* d = std::get_if<DenseLayer>(&layer)) {
            Matrix dz(n, d->out());
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d->out(); ++j) {
                    double post = apply_activation(d->activation, c.pre(i, j));
                    dz(i, j) = dy(i, j) * activation_grad(d->activation, c.pre(i, j), post);
                }
            double* dw = g.params.data() + offsets[li];
            double* db = dw + d->weights.data.size();
            for (std::size_t i = 0; i < n; ++i) {
                const double* xi = &c.input.data[i * c.input.cols];
                const double* dzi = &dz.data[i * dz.cols];
                for (std::size_t k = 0; k < d->in(); ++k) {
                    const double a = xi[k];
                    if (a == 0.0) continue;
                    double* dwk = dw + k * d->out();
                    for (std::size_t j = 0; j < d->out(); ++j) dwk[j] += a * dzi[j];
                }
                for (std::size_t j = 0; j < d->out(); ++j) db[j] += dzi[j];
            }
            Matrix dx(n, d->in());
            for (std::size_t i = 0; i < n; ++i) {
                const double* dzi = &dz.data[i * dz.cols];
                double* dxi = &dx.data[i * dx.cols];
                for (std::size_t k = 0; k < d->in(); ++k) {
                    const double* wk = &d->weights.data[k * d->out()];
                    double acc = 0.0;
                    for (std::size_t j = 0; j < d->out(); ++j) acc += dzi[j] * wk[j];
                    dxi[k] = acc;
                }
            }
            dy = std::move(dx);
        } else if (auto* b = std::get_if<BatchNormLayer>(&layer)) {
            const std::size_t w = b->width();
            double* dgamma = g.params.data() + offsets[li];
            double* dbeta = dgamma + w;
            std::vector<double> sum_dy(w, 0.0), sum_dy_xhat(w, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    sum_dy[j] += dy(i, j);
                    sum_dy_xhat[j] += dy(i, j) * c.pre(i, j);
                }
            for (std::size_t j = 0; j < w; ++j) {
                dgamma[j] += sum_dy_xhat[j];
                dbeta[j] += sum_dy[j];
            }
            Matrix dx(n, w);
            const double nn = static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    double inv_std = 1.0 / std::sqrt(c.var[j] + b->epsilon);
                    dx(i, j) = (b->gamma[j] * inv_std / nn) *
                               (nn * dy(i, j) - sum_dy[j] - c.pre(i, j) * sum_dy_xhat[j]);
                }
            dy = std::move(dx);
        } else {
            auto& a = std::get<ActivationLayer>(layer);
            Matrix dx(n, dy.cols);
            for (std::size_t i = 0; i < dy.data.size(); ++i) {
                double pre = c.pre.data[i];
                double post = apply_activation(a.activation, pre);
                dx.data[i] = dy.data[i] * activation_grad(a.activation, pre, post);
            }
            dy = std::move(dx);
        }
    }
    g.input = std::move(dy);
    has_cache_ = false;
    cache_.clear();
    return g;
}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += layer_param_count(l);
    return n;
}

std::vector<double> Network::flat_params() const {
    std::vector<double> p;
    p.reserve(param_count());
    for (const auto& l : layers_) {
        if (const auto* d = std::get_if<DenseLayer>(&l)) {
            p.insert(p.end(), d->weights.data.begin(), d->weights.data.end());
            p.insert(p.end(), d->bias.begin(), d->bias.end());
        } else if (const auto* b = std::get_if<BatchNormLayer>(&l)) {
            p.insert(p.end(), b->gamma.begin(), b->gamma.end());
            p.insert(p.end(), b->beta.begin(), b->beta.end());
        }
    }
    return p;
}

void Network::set_flat_params(std::span<const double> p) {
    if (p.size() != param_count())
        throw std::invalid_argument("set_flat_params: expected " +
                                    std::to_string(param_count()) + " values, got " +
                                    std::to_string(p.size()));
    std::size_t off = 0;
    for (auto& l : layers_) {
        if (auto* d = std::get_if<DenseLayer>(&l)) {
            std::copy_n(p.begin() + off, d->weights.data.size(), d->weights.data.begin());
            off += d->weights.data.size();
            std::copy_n(p.begin() + off, d->bias.size(), d->bias.begin());
            off += d->bias.size();
        } else if (auto* b = std::get_if<BatchNormLayer>(&l)) {
            std::copy_n(p.begin() + off, b->gamma.size(), b->gamma.begin());
            off += b->gamma.size();
            std::copy_n(p.begin() + off, b->beta.size(), b->beta.begin());
            off += b->beta.size();
        }
    }
}

std::vector<double> Network::flat_state() const {
    std::vector<double> s = flat_params();
    for (const auto& l : layers_) {
        if (const auto* b = std::get_if<BatchNormLayer>(&l)) {
            s.insert(s.end(), b->running_mean.begin(), b->running_mean.end());
            s.insert(s.end(), b->running_var.begin(), b->running_var.end());
        }
    }
    return s;
}

void Network::set_flat_state(std::span<const double> s) {
    std::size_t np = param_count();
    if (s.size() < np) throw std::invalid_argument("set_flat_state: too few values");
    set_flat_params(s.subspan(0, np));
    std::size_t off = np;
    for (auto& l : layers_) {
        if (auto* b = std::get_if<BatchNormLayer>(&l)) {
            if (off + 2 * b->width() > s.size())
                throw std::invalid_argument("set_flat_state: too few values");
            std::copy_n(s.begin() + off, b->width(), b->running_mean.begin());
            off += b->width();
            std::copy_n(s.begin() + off, b->width(), b->running_var.begin());
            off += b->width();
        }
    }
    if (off != s.size()) throw std::invalid_argument("set_flat_state: size mismatch");
}

bool Network::same_architecture(const Network& o) const {
    if (layers_.size() != o.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].index() != o.layers_[i].index()) return false;
        if (const auto* d = std::get_if<DenseLayer>(&layers_[i])) {
            const auto& od = std::get<DenseLayer>(o.layers_[i]);
            if (d->in() != od.in() || d->out() != od.out() ||
                d->activation != od.activation)
                return false;
        } else if (const auto* b = std::get_if<BatchNormLayer>(&layers_[i])) {
            const auto& ob = std::get<BatchNormLayer>(o.layers_[i]);
            if (b->width() != ob.width()) return false;
        } else {
            const auto& a = std::get<ActivationLayer>(layers_[i]);
            const auto& oa = std::get<ActivationLayer>(o.layers_[i]);
            if (a.activation != oa.activation) return false;
        }
    }
    return true;
}

std::vector<std::span<double>> Network::param_spans() {
    std::vector<std::span<double>> out;
    for (auto& l : layers_) {
        if (auto* d = std::get_if<DenseLayer>(&l)) {
            out.emplace_back(d->weights.data);
            out.emplace_back(d->bias);
        } else if (auto* b = std::get_if<BatchNormLayer>(&l)) {
            out.emplace_back(b->gamma);
            out.emplace_back(b->beta);
        }
    }
    return out;
}

std::vector<std::span<double>> Network::state_spans() {
    std::vector<std::span<double>> out = param_spans();
    for (auto& l : layers_) {
        if (auto* b = std::get_if<BatchNormLayer>(&l)) {
            out.emplace_back(b->running_mean);
            out.emplace_back(b->running_var);
        }
    }
    return out;
}

DenseLayer make_dense(std::size_t in, std::size_t out, Activation act,
                      std::mt19937_64& rng) {
    DenseLayer d;
    d.weights = Matrix(in, out);
    d.bias.assign(out, 0.0);
    d.activation = act;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& w : d.weights.data) w = u(rng);
    return d;
}

BceResult bce(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size())
        throw std::invalid_argument("bce: pred length " + std::to_string(pred.size()) +
                                    " != target length " + std::to_string(target.size()));
    if (pred.empty()) throw std::invalid_argument("bce: empty input");
    BceResult r;
    r.grad.resize(pred.size());
    const double n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double p = std::clamp(pred[i], kBceClamp, 1.0 - kBceClamp);
        double t = target[i];
        r.loss += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
        r.grad[i] = (-t / p + (1.0 - t) / (1.0 - p)) / n;
    }
    r.loss /= n;
    return r;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: shape mismatch (params " +
                                    std::to_string(params.size()) + ", grads " +
                                    std::to_string(grads.size()) + ", state " +
                                    std::to_string(state.m.size()) + ")");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

void adam_step_networks(std::initializer_list<Network*> nets,
                        std::span<const double> grads, AdamState& state) {
    std::size_t total = 0;
    for (Network* n : nets) total += n->param_count();
    if (grads.size() != total || state.m.size() != total)
        throw std::invalid_argument("adam_step_networks: shape mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    std::size_t i = 0;
    for (Network* n : nets) {
        for (std::span<double> ps : n->param_spans()) {
            for (double& p : ps) {
                state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
                state.v[i] =
                    state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
                p -= state.learning_rate * (state.m[i] / bc1) /
                     (std::sqrt(state.v[i] / bc2) + state.epsilon);
                ++i;
            }
        }
    }
}

void soft_update(Network& target, const Network& online, double tau) {
    if (!target.same_architecture(online))
        throw std::invalid_argument("soft_update: architecture mismatch");
    auto ts = target.state_spans();
    auto os = const_cast<Network&>(online).state_spans();
    for (std::size_t s = 0; s < ts.size(); ++s)
        for (std::size_t i = 0; i < ts[s].size(); ++i)
            ts[s][i] = (1.0 - tau) * ts[s][i] + tau * os[s][i];
}

}  // namespace relevagan::nn
