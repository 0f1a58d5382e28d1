#include "relevagan/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace relevagan::data {

// The 13 perturbable flow features; indices must stay unique, so
// TotalFwdPackets rounds out the fwd/bwd length and rate columns.
const std::array<std::string, kActionSpaceSize> kActionFeatureNames = {
    "FlowDuration",
    "FlowBytes/s",
    "FlowPackets/s",
    "FwdPackets/s",
    "BwdPackets/s",
    "TotalLengthofFwdPacket",
    "TotalLengthofBwdPacket",
    "TotalFwdPackets",
    "SubflowFwdBytes",
    "FwdHeaderLength",
    "BwdHeaderLength",
    "Down/UpRatio",
    "AveragePacketSize",
};

std::size_t FlowDataset::count(Label l) const {
    return static_cast<std::size_t>(std::count(y.begin(), y.end(), l));
}

std::vector<std::size_t> FlowDataset::indices(Label l) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] == l) out.push_back(i);
    return out;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) cells.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    return std::isfinite(out);
}

}  // namespace

LoadReport load_csv(const std::string& path, const std::string& label_column,
                    const std::set<std::string>& bot_labels) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
    std::vector<std::string> header = split_line(line);

    std::size_t label_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) label_col = i;
    if (label_col == header.size())
        throw std::runtime_error("label column '" + label_column + "' not found in " + path);

    LoadReport rep;
    rep.dataset.provenance = path;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (i != label_col) rep.dataset.feature_names.push_back(header[i]);
    const std::size_t nfeat = rep.dataset.feature_names.size();

    std::vector<double> values;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size()) {
            rep.dropped_rows++;
            continue;
        }
        std::vector<double> row;
        row.reserve(nfeat);
        bool ok = true;
        for (std::size_t i = 0; i < cells.size() && ok; ++i) {
            if (i == label_col) continue;
            double v;
            if (!parse_double(cells[i], v)) ok = false;
            else row.push_back(v);
        }
        if (!ok) {
            rep.dropped_rows++;
            continue;
        }
        Label l = bot_labels.count(cells[label_col]) ? Label::bot : Label::normal;
        rep.dataset.y.push_back(l);
        values.insert(values.end(), row.begin(), row.end());
        if (l == Label::bot) rep.n_bot++; else rep.n_normal++;
    }
    if (rep.dataset.y.empty())
        throw std::runtime_error("no usable rows in dataset: " + path);
    rep.dataset.X.rows = rep.dataset.y.size();
    rep.dataset.X.cols = nfeat;
    rep.dataset.X.data = std::move(values);
    return rep;
}

ScalerParams fit_scaler(const FlowDataset& ds) {
    if (ds.scaled) throw std::invalid_argument("fit_scaler: dataset already scaled");
    if (ds.X.rows == 0) throw std::invalid_argument("fit_scaler: empty dataset");
    ScalerParams p;
    p.min.assign(ds.X.cols, 0.0);
    p.max.assign(ds.X.cols, 0.0);
    for (std::size_t j = 0; j < ds.X.cols; ++j) {
        double lo = ds.X(0, j), hi = ds.X(0, j);
        for (std::size_t i = 1; i < ds.X.rows; ++i) {
            lo = std::min(lo, ds.X(i, j));
            hi = std::max(hi, ds.X(i, j));
        }
        p.min[j] = lo;
        p.max[j] = hi;
    }
    return p;
}

FlowDataset apply_scaler(const FlowDataset& ds, const ScalerParams& p) {
    if (p.min.size() != ds.X.cols)
        throw std::invalid_argument("apply_scaler: feature count mismatch");
    FlowDataset out = ds;
    for (std::size_t j = 0; j < ds.X.cols; ++j) {
        double range = p.max[j] - p.min[j];
        for (std::size_t i = 0; i < ds.X.rows; ++i)
            out.X(i, j) = range > 0.0 ? (ds.X(i, j) - p.min[j]) / range : 0.0;
    }
    out.scaled = true;
    return out;
}

FlowDataset invert_scaler(const FlowDataset& ds, const ScalerParams& p) {
    if (p.min.size() != ds.X.cols)
        throw std::invalid_argument("invert_scaler: feature count mismatch");
    FlowDataset out = ds;
    for (std::size_t j = 0; j < ds.X.cols; ++j) {
        double range = p.max[j] - p.min[j];
        for (std::size_t i = 0; i < ds.X.rows; ++i)
            out.X(i, j) = range > 0.0 ? ds.X(i, j) * range + p.min[j] : p.min[j];
    }
    out.scaled = false;
    return out;
}

void save_scaler(const ScalerParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scaler: " + path);
    out << "relevagan-scaler v1\n" << p.min.size() << "\n";
    char buf[64];
    for (std::size_t j = 0; j < p.min.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%a %a", p.min[j], p.max[j]);
        out << buf << "\n";
    }
}

ScalerParams load_scaler(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scaler: " + path);
    std::string magic, version;
    std::size_t n = 0;
    in >> magic >> version >> n;
    if (magic != "relevagan-scaler" || version != "v1")
        throw std::runtime_error("bad scaler file: " + path);
    ScalerParams p;
    p.min.resize(n);
    p.max.resize(n);
    std::string a, b;
    for (std::size_t j = 0; j < n; ++j) {
        if (!(in >> a >> b)) throw std::runtime_error("truncated scaler file: " + path);
        p.min[j] = std::strtod(a.c_str(), nullptr);
        p.max[j] = std::strtod(b.c_str(), nullptr);
    }
    return p;
}

ActionFeatureMap make_action_map(const FlowDataset& ds) {
    ActionFeatureMap map;
    std::string missing;
    for (const auto& name : kActionFeatureNames) {
        auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), name);
        if (it == ds.feature_names.end()) {
            missing += missing.empty() ? name : ", " + name;
            continue;
        }
        map.names.push_back(name);
        map.indices.push_back(static_cast<std::size_t>(it - ds.feature_names.begin()));
    }
    if (!missing.empty())
        throw std::runtime_error("dataset is missing action-space features: " + missing);
    return map;
}

DeltaVector compute_deltas(const FlowDataset& ds, const ActionFeatureMap& map) {
    if (ds.X.rows == 0) throw std::invalid_argument("compute_deltas: empty dataset");
    DeltaVector dv;
    dv.values.reserve(map.indices.size());
    for (std::size_t col : map.indices) {
        double best = 0.0;
        for (std::size_t i = 0; i < ds.X.rows; ++i) {
            double v = ds.X(i, col);
            if (v > 0.0 && (best == 0.0 || v < best)) best = v;
        }
        dv.values.push_back(best > 0.0 ? best : kDeltaFallback);
    }
    return dv;
}

namespace {

FlowDataset take_rows(const FlowDataset& ds, const std::vector<std::size_t>& idx) {
    FlowDataset out;
    out.feature_names = ds.feature_names;
    out.scaled = ds.scaled;
    out.provenance = ds.provenance;
    out.X = Matrix(idx.size(), ds.X.cols);
    out.y.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::copy_n(ds.X.row(idx[r]).begin(), ds.X.cols, out.X.row(r).begin());
        out.y.push_back(ds.y[idx[r]]);
    }
    return out;
}

}  // namespace

Split split(const FlowDataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split: train_fraction must be in (0,1)");
    std::mt19937_64 rng(seed);
    Split s;
    for (Label l : {Label::normal, Label::bot}) {
        std::vector<std::size_t> idx = ds.indices(l);
        if (idx.size() < 2)
            throw std::invalid_argument("split: class has fewer than 2 samples");
        std::shuffle(idx.begin(), idx.end(), rng);
        std::size_t ntrain = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(idx.size())));
        ntrain = std::clamp<std::size_t>(ntrain, 1, idx.size() - 1);
        s.train_indices.insert(s.train_indices.end(), idx.begin(), idx.begin() + ntrain);
        s.test_indices.insert(s.test_indices.end(), idx.begin() + ntrain, idx.end());
    }
    std::sort(s.train_indices.begin(), s.train_indices.end());
    std::sort(s.test_indices.begin(), s.test_indices.end());
    s.train = take_rows(ds, s.train_indices);
    s.test = take_rows(ds, s.test_indices);
    return s;
}

Matrix sample_batch(const FlowDataset& ds, Label cls, std::size_t size,
                    std::uint64_t seed, bool with_replacement) {
    std::vector<std::size_t> idx = ds.indices(cls);
    if (idx.empty()) throw std::invalid_argument("sample_batch: class not present");
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> picked;
    if (with_replacement) {
        std::uniform_int_distribution<std::size_t> u(0, idx.size() - 1);
        for (std::size_t i = 0; i < size; ++i) picked.push_back(idx[u(rng)]);
    } else {
        if (idx.size() < size)
            throw std::invalid_argument("sample_batch: class count " +
                                        std::to_string(idx.size()) +
                                        " < requested " + std::to_string(size) +
                                        " without replacement");
        std::shuffle(idx.begin(), idx.end(), rng);
        picked.assign(idx.begin(), idx.begin() + size);
    }
    Matrix out(picked.size(), ds.X.cols);
    for (std::size_t r = 0; r < picked.size(); ++r)
        std::copy_n(ds.X.row(picked[r]).begin(), ds.X.cols, out.row(r).begin());
    return out;
}

FlowDataset synth_fixture(std::size_t n_normal, std::size_t n_bot,
                          std::size_t n_features, double separation,
                          std::uint64_t seed) {
    if (n_features < kActionSpaceSize)
        throw std::invalid_argument("synth_fixture: need at least 13 features");
    if (!(separation > 0.0))
        throw std::invalid_argument("synth_fixture: separation must be positive");
    FlowDataset ds;
    ds.provenance = "synth_fixture";
    for (std::size_t j = 0; j < n_features; ++j)
        ds.feature_names.push_back(j < kActionSpaceSize
                                       ? kActionFeatureNames[j]
                                       : "Extra" + std::to_string(j - kActionSpaceSize));
    const std::size_t total = n_normal + n_bot;
    ds.X = Matrix(total, n_features);
    ds.y.reserve(total);

    const double base = 6.0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < total; ++i) {
        const bool bot = i >= n_normal;
        ds.y.push_back(bot ? Label::bot : Label::normal);
        for (std::size_t j = 0; j < n_features; ++j) {
            // Bot cluster shifted by +/- separation, alternating per feature.
            double mean = base;
            if (bot) mean += (j % 2 == 0 ? separation : -separation);
            double v = mean + g(rng);
            ds.X(i, j) = std::max(v, 0.0);
        }
    }
    return ds;
}

void save_csv(const FlowDataset& ds, const std::string& path,
              const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write csv: " + path);
    for (const auto& n : ds.feature_names) out << n << ",";
    out << label_column << "\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.X.rows; ++i) {
        for (std::size_t j = 0; j < ds.X.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.X(i, j));
            out << buf << ",";
        }
        out << (ds.y[i] == Label::bot ? "bot" : "normal") << "\n";
    }
}

}  // namespace relevagan::data
