#include "relevagan/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace relevagan::nn {

namespace {

const char* kMagic = "relevagan-net";
const int kVersion = 1;

const char* act_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::linear: return "linear";
    }
    return "linear";
}

Activation act_from(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "linear") return Activation::linear;
    throw std::runtime_error("checkpoint: unknown activation '" + s + "'");
}

void write_values(std::ostream& out, const std::vector<double>& v) {
    char buf[64];
    for (double x : v) {
        std::snprintf(buf, sizeof(buf), "%a", x);
        out << buf << "\n";
    }
}

std::vector<double> read_values(std::istream& in, std::size_t n) {
    std::vector<double> v(n);
    std::string tok;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated value block");
        v[i] = std::strtod(tok.c_str(), nullptr);
    }
    return v;
}

}  // namespace

void save_network(const Network& net, std::ostream& out) {
    out << kMagic << " v" << kVersion << "\n";
    out << "layers " << net.layers().size() << "\n";
    for (const auto& l : net.layers()) {
        if (const auto* d = std::get_if<DenseLayer>(&l)) {
            out << "dense " << d->in() << " " << d->out() << " " << act_name(d->activation)
                << "\n";
            write_values(out, d->weights.data);
            write_values(out, d->bias);
        } else if (const auto* b = std::get_if<BatchNormLayer>(&l)) {
            char mbuf[64], ebuf[64];
            std::snprintf(mbuf, sizeof(mbuf), "%a", b->momentum);
            std::snprintf(ebuf, sizeof(ebuf), "%a", b->epsilon);
            out << "batchnorm " << b->width() << " " << mbuf << " " << ebuf << "\n";
            write_values(out, b->gamma);
            write_values(out, b->beta);
            write_values(out, b->running_mean);
            write_values(out, b->running_var);
        } else {
            const auto& a = std::get<ActivationLayer>(l);
            out << "activation " << act_name(a.activation) << "\n";
        }
    }
}

Network load_network(std::istream& in) {
    std::string magic, version;
    if (!(in >> magic >> version) || magic != kMagic)
        throw std::runtime_error("checkpoint: bad magic");
    if (version != "v1") throw std::runtime_error("checkpoint: unsupported version " + version);
    std::string tok;
    std::size_t nlayers = 0;
    if (!(in >> tok >> nlayers) || tok != "layers")
        throw std::runtime_error("checkpoint: missing layer count");
    Network net;
    for (std::size_t i = 0; i < nlayers; ++i) {
        std::string kind;
        if (!(in >> kind)) throw std::runtime_error("checkpoint: truncated");
        if (kind == "dense") {
            std::size_t din = 0, dout = 0;
            std::string act;
            in >> din >> dout >> act;
            DenseLayer d;
            d.weights = Matrix(din, dout);
            d.activation = act_from(act);
            d.weights.data = read_values(in, din * dout);
            d.bias = read_values(in, dout);
            net.add(std::move(d));
        } else if (kind == "batchnorm") {
            std::size_t w = 0;
            std::string mtok, etok;
            in >> w >> mtok >> etok;
            BatchNormLayer b(w, std::strtod(mtok.c_str(), nullptr),
                             std::strtod(etok.c_str(), nullptr));
            b.gamma = read_values(in, w);
            b.beta = read_values(in, w);
            b.running_mean = read_values(in, w);
            b.running_var = read_values(in, w);
            net.add(std::move(b));
        } else if (kind == "activation") {
            std::string act;
            in >> act;
            net.add(ActivationLayer{act_from(act)});
        } else {
            throw std::runtime_error("checkpoint: unknown layer kind '" + kind + "'");
        }
    }
    return net;
}

void save_network_file(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open checkpoint for write: " + path);
    save_network(net, out);
}

Network load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    return load_network(in);
}

}  // namespace relevagan::nn
