#include "boxseg/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace boxseg {

void NetConfig::validate() const {
    if (widths.size() < 2) throw Error("net needs at least one encoder layer");
    for (int w : widths) {
        if (w < 1) throw Error("net widths must be positive");
    }
    if (class_count < 1 || class_count > kMaxClasses) throw Error("net class count out of range");
    if (knn_context) {
        if (context_after < 1 || context_after >= encoder_layers())
            throw Error("context step must sit between two encoder layers");
        if (knn_k < 1) throw Error("context step needs k >= 1");
    }
}

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out, std::mt19937_64* rng) {
    DenseLayer layer{Matrix(in, out), std::vector<double>(out, 0.0)};
    if (rng != nullptr) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in)));
        for (auto& w : layer.weight.values()) w = dist(*rng);
    }
    return layer;
}

std::size_t layer_input_dim(const NetConfig& cfg, int l) {
    auto dim = static_cast<std::size_t>(cfg.widths[static_cast<std::size_t>(l)]);
    if (cfg.knn_context && l == cfg.context_after) dim *= 2;
    return dim;
}

void check_finite(const Matrix& m, const char* what) {
    for (double v : m.values()) {
        if (!std::isfinite(v)) throw Error(std::string("non-finite activation in ") + what);
    }
}

}  // namespace

PointNetLite::PointNetLite(NetConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(seed);
    for (int l = 0; l < config_.encoder_layers(); ++l) {
        encoder_.push_back(make_layer(layer_input_dim(config_, l),
                                      static_cast<std::size_t>(config_.widths[static_cast<std::size_t>(l) + 1]), &rng));
    }
    const auto f = static_cast<std::size_t>(config_.feature_dim());
    const auto c = static_cast<std::size_t>(config_.class_count);
    classifier_ = make_layer(f, c, &rng);
    segmenter_ = make_layer(f, c, &rng);
}

std::vector<std::span<double>> PointNetLite::parameter_blocks() {
    std::vector<std::span<double>> blocks;
    for (auto& l : encoder_) {
        blocks.emplace_back(l.weight.values());
        blocks.emplace_back(l.bias);
    }
    blocks.emplace_back(classifier_.weight.values());
    blocks.emplace_back(classifier_.bias);
    blocks.emplace_back(segmenter_.weight.values());
    blocks.emplace_back(segmenter_.bias);
    return blocks;
}

std::size_t PointNetLite::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : encoder_) n += l.weight.values().size() + l.bias.size();
    n += classifier_.weight.values().size() + classifier_.bias.size();
    n += segmenter_.weight.values().size() + segmenter_.bias.size();
    return n;
}

bool PointNetLite::finite() const {
    auto ok = [](const DenseLayer& l) {
        return std::all_of(l.weight.values().begin(), l.weight.values().end(), [](double v) { return std::isfinite(v); }) &&
               std::all_of(l.bias.begin(), l.bias.end(), [](double v) { return std::isfinite(v); });
    };
    return std::all_of(encoder_.begin(), encoder_.end(), ok) && ok(classifier_) && ok(segmenter_);
}

ForwardResult forward(const PointNetLite& net, const Matrix& inputs, const NeighborTable* neighbors) {
    const auto& cfg = net.config();
    if (inputs.rows() == 0) throw Error("forward needs at least one point");
    if (inputs.cols() != static_cast<std::size_t>(cfg.widths[0])) throw Error("forward input width mismatch");

    ForwardResult r;
    r.activations.reserve(net.encoder().size() + 1);
    r.activations.push_back(inputs);
    if (cfg.knn_context) {
        if (neighbors != nullptr) {
            if (neighbors->size() != inputs.rows()) throw Error("neighbor table does not match the inputs");
            r.neighbors = *neighbors;
        } else {
            std::vector<Vec3> pts(inputs.rows());
            for (std::size_t i = 0; i < inputs.rows(); ++i)
                pts[i] = {inputs(i, 0), inputs.cols() > 1 ? inputs(i, 1) : 0.0, inputs.cols() > 2 ? inputs(i, 2) : 0.0};
            r.neighbors = knn(pts, static_cast<std::size_t>(cfg.knn_k));
        }
    }

    for (int l = 0; l < cfg.encoder_layers(); ++l) {
        const auto& layer = net.encoder()[static_cast<std::size_t>(l)];
        const Matrix* in = &r.activations.back();
        if (cfg.knn_context && l == cfg.context_after) {
            neighbor_mean(*in, r.neighbors, r.context);
            const std::size_t n = in->rows(), d = in->cols();
            r.context_input = Matrix(n, 2 * d);
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(&(*in)(i, 0), d, &r.context_input(i, 0));
                std::copy_n(&r.context(i, 0), d, &r.context_input(i, d));
            }
            in = &r.context_input;
        }
        Matrix out;
        dense_forward(*in, layer.weight, layer.bias, out, true);
        check_finite(out, "encoder");
        r.activations.push_back(std::move(out));
    }

    const Matrix& f = r.features();
    const std::size_t n = f.rows(), fd = f.cols();
    const auto c = static_cast<std::size_t>(cfg.class_count);

    r.pooled.assign(fd, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < fd; ++d) r.pooled[d] += f(i, d);
    }
    for (auto& v : r.pooled) v /= static_cast<double>(n);
    r.class_logits = net.classifier().bias;
    for (std::size_t d = 0; d < fd; ++d) {
        for (std::size_t k = 0; k < c; ++k) r.class_logits[k] += r.pooled[d] * net.classifier().weight(d, k);
    }

    dense_forward(f, net.segmenter().weight, net.segmenter().bias, r.seg_logits, false);
    check_finite(r.seg_logits, "segmentation head");
    r.attention = Matrix(n, c);
    r.probs = Matrix(n, c);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double mx = r.seg_logits(i, 0);
        for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, r.seg_logits(i, k));
        double sum = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            const double z = r.seg_logits(i, k);
            r.attention(i, k) = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            r.probs(i, k) = std::exp(z - mx);
            sum += r.probs(i, k);
        }
        for (std::size_t k = 0; k < c; ++k) r.probs(i, k) /= sum;
    }
    r.valid = true;
    return r;
}

Gradients::Gradients(const PointNetLite& net) {
    for (const auto& l : net.encoder())
        encoder.push_back({Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size(), 0.0)});
    classifier = {Matrix(net.classifier().weight.rows(), net.classifier().weight.cols()),
                  std::vector<double>(net.classifier().bias.size(), 0.0)};
    segmenter = {Matrix(net.segmenter().weight.rows(), net.segmenter().weight.cols()),
                 std::vector<double>(net.segmenter().bias.size(), 0.0)};
}

std::vector<std::span<double>> Gradients::blocks() {
    std::vector<std::span<double>> b;
    for (auto& l : encoder) {
        b.emplace_back(l.weight.values());
        b.emplace_back(l.bias);
    }
    b.emplace_back(classifier.weight.values());
    b.emplace_back(classifier.bias);
    b.emplace_back(segmenter.weight.values());
    b.emplace_back(segmenter.bias);
    return b;
}

std::vector<std::span<const double>> Gradients::blocks() const {
    auto mut = const_cast<Gradients*>(this)->blocks();
    return {mut.begin(), mut.end()};
}

void Gradients::add(const Gradients& other, double scale) {
    auto dst = blocks();
    auto src = other.blocks();
    for (std::size_t b = 0; b < dst.size(); ++b) {
        for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += scale * src[b][i];
    }
}

void Gradients::scale(double s) {
    for (auto block : blocks()) {
        for (auto& v : block) v *= s;
    }
}

Gradients backward(const PointNetLite& net, const ForwardResult& fwd, std::span<const double> d_class_logits,
                   const Matrix* d_seg_logits) {
    if (!fwd.valid) throw Error("backward called without a forward pass");
    const auto& cfg = net.config();
    Gradients g(net);
    const Matrix& f = fwd.features();
    const std::size_t n = f.rows(), fd = f.cols();
    const auto c = static_cast<std::size_t>(cfg.class_count);

    Matrix d_f(n, fd);
    if (d_seg_logits != nullptr) {
        if (d_seg_logits->rows() != n || d_seg_logits->cols() != c) throw Error("seg-logit gradient shape mismatch");
        dense_backward(*d_seg_logits, f, net.segmenter().weight, g.segmenter.weight, g.segmenter.bias, &d_f);
    }
    if (!d_class_logits.empty()) {
        if (d_class_logits.size() != c) throw Error("class-logit gradient length mismatch");
        std::vector<double> d_pooled(fd, 0.0);
        for (std::size_t d = 0; d < fd; ++d) {
            for (std::size_t k = 0; k < c; ++k) {
                g.classifier.weight(d, k) += fwd.pooled[d] * d_class_logits[k];
                d_pooled[d] += net.classifier().weight(d, k) * d_class_logits[k];
            }
        }
        for (std::size_t k = 0; k < c; ++k) g.classifier.bias[k] += d_class_logits[k];
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < fd; ++d) d_f(i, d) += d_pooled[d] * inv_n;
        }
    }

    // Encoder, last layer first. d_act holds the gradient w.r.t. activations[l+1].
    Matrix d_act = std::move(d_f);
    std::vector<std::vector<std::uint32_t>> reverse;
    for (int l = cfg.encoder_layers() - 1; l >= 0; --l) {
        const auto ul = static_cast<std::size_t>(l);
        const Matrix& out = fwd.activations[ul + 1];
        for (std::size_t i = 0; i < d_act.values().size(); ++i) {
            if (out.values()[i] <= 0.0) d_act.values()[i] = 0.0;
        }
        const bool context = cfg.knn_context && l == cfg.context_after;
        const Matrix& in = context ? fwd.context_input : fwd.activations[ul];
        Matrix d_in;
        dense_backward(d_act, in, net.encoder()[ul].weight, g.encoder[ul].weight, g.encoder[ul].bias,
                       l > 0 ? &d_in : nullptr);
        if (l == 0) break;
        if (context) {
            const std::size_t d = fwd.activations[ul].cols();
            Matrix d_plain(n, d), d_ctx(n, d);
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(&d_in(i, 0), d, &d_plain(i, 0));
                std::copy_n(&d_in(i, d), d, &d_ctx(i, 0));
            }
            reverse = reverse_neighbors(fwd.neighbors);
            neighbor_mean_backward(d_ctx, fwd.neighbors, reverse, d_plain);
            d_act = std::move(d_plain);
        } else {
            d_act = std::move(d_in);
        }
    }
    return g;
}

double sigmoid_ce_loss(std::span<const double> logits, const SubcloudTag& tag, std::vector<double>* grad) {
    if (tag.bits.size() != logits.size()) throw Error("tag length differs from logit count");
    double loss = 0.0;
    if (grad != nullptr) grad->assign(logits.size(), 0.0);
    for (std::size_t c = 0; c < logits.size(); ++c) {
        const double z = logits[c];
        const double y = tag.bits[c] ? 1.0 : 0.0;
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        if (grad != nullptr) {
            const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            (*grad)[c] = s - y;
        }
    }
    return loss;
}

double cross_entropy_loss(const Matrix& probs, std::span<const std::uint32_t> rows, std::span<const ClassId> targets,
                          Matrix* d_z, double scale) {
    if (rows.size() != targets.size()) throw Error("cross-entropy rows and targets differ in length");
    if (rows.empty()) return 0.0;
    const double inv = 1.0 / static_cast<double>(rows.size());
    const std::size_t c = probs.cols();
    double loss = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        const std::size_t t = targets[r];
        if (t >= c) throw Error("cross-entropy target out of range");
        const double p = probs(i, t);
        if (p < kProbFloor) {
            loss -= std::log(kProbFloor);
            continue;
        }
        loss -= std::log(p);
        if (d_z != nullptr) {
            for (std::size_t k = 0; k < c; ++k) (*d_z)(i, k) += scale * inv * (probs(i, k) - (k == t ? 1.0 : 0.0));
        }
    }
    return loss * inv;
}

double TrainConfig::learning_rate_at(int epoch) const { return learning_rate * std::pow(decay, epoch); }

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (!(decay > 0.0 && decay <= 1.0)) throw Error("decay must be in (0,1]");
    if (epochs < 0) throw Error("epochs must be non-negative");
    if (!(alpha >= 0.0)) throw Error("alpha must be non-negative");
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error("tau must be in [0,1]");
    if (!(refine_fraction > 0.0 && refine_fraction <= 1.0)) throw Error("refine fraction must be in (0,1]");
    if (refresh_every < 1) throw Error("refresh interval must be >= 1");
    if (!(weight_decay >= 0.0)) throw Error("weight decay must be >= 0");
}

ParameterUpdater::ParameterUpdater(const PointNetLite& net, Optimizer kind) : kind_(kind) {
    if (kind_ == Optimizer::Adam) {
        auto blocks = const_cast<PointNetLite&>(net).parameter_blocks();
        for (const auto& b : blocks) {
            m_.emplace_back(b.size(), 0.0);
            v_.emplace_back(b.size(), 0.0);
        }
    }
}

void ParameterUpdater::step(PointNetLite& net, const Gradients& grads, double lr, double weight_decay) {
    auto params = net.parameter_blocks();
    auto g = grads.blocks();
    if (weight_decay > 0.0) {
        // blocks alternate weight, bias
        for (std::size_t b = 0; b < params.size(); b += 2) {
            for (auto& w : params[b]) w -= lr * weight_decay * w;
        }
    }
    if (kind_ == Optimizer::Sgd) {
        for (std::size_t b = 0; b < params.size(); ++b) {
            for (std::size_t i = 0; i < params[b].size(); ++i) params[b][i] -= lr * g[b][i];
        }
        return;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            m_[b][i] = beta1 * m_[b][i] + (1.0 - beta1) * g[b][i];
            v_[b][i] = beta2 * v_[b][i] + (1.0 - beta2) * g[b][i] * g[b][i];
            params[b][i] -= lr * (m_[b][i] / c1) / (std::sqrt(v_[b][i] / c2) + eps);
        }
    }
}

namespace {

void write_layer(std::ostream& out, const char* name, const DenseLayer& l) {
    out << "L " << name << ' ' << l.weight.rows() << ' ' << l.weight.cols() << '\n';
    for (std::size_t r = 0; r < l.weight.rows(); ++r) {
        for (std::size_t c = 0; c < l.weight.cols(); ++c) {
            if (c) out << ' ';
            out << format_double(l.weight(r, c));
        }
        out << '\n';
    }
    for (std::size_t c = 0; c < l.bias.size(); ++c) {
        if (c) out << ' ';
        out << format_double(l.bias[c]);
    }
    out << '\n';
}

void read_layer(std::istream& in, const std::string& expected, DenseLayer& l) {
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> tag >> name >> rows >> cols) || tag != "L" || name != expected)
        throw ParseError("checkpoint: expected layer " + expected);
    if (rows != l.weight.rows() || cols != l.weight.cols())
        throw ParseError("checkpoint: layer " + expected + " has shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    std::string tok;
    auto read_value = [&](double& v) {
        if (!(in >> tok)) throw ParseError("checkpoint: truncated layer " + expected);
        try {
            std::size_t used = 0;
            v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ParseError("checkpoint: bad value '" + tok + "' in layer " + expected);
        }
    };
    for (auto& v : l.weight.values()) read_value(v);
    for (auto& v : l.bias) read_value(v);
}

}  // namespace

void save_checkpoint(const PointNetLite& net, std::ostream& out) {
    const auto& cfg = net.config();
    out << "NET v1\n";
    out << "classes " << cfg.class_count << '\n';
    out << "widths";
    for (int w : cfg.widths) out << ' ' << w;
    out << '\n';
    out << "context " << (cfg.knn_context ? 1 : 0) << ' ' << cfg.context_after << ' ' << cfg.knn_k << '\n';
    for (std::size_t l = 0; l < net.encoder().size(); ++l) {
        const std::string name = "encoder" + std::to_string(l);
        write_layer(out, name.c_str(), net.encoder()[l]);
    }
    write_layer(out, "classifier", net.classifier());
    write_layer(out, "segmenter", net.segmenter());
}

PointNetLite load_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "NET v1") throw ParseError("checkpoint: malformed header");
    NetConfig cfg;
    std::string key;
    if (!(in >> key >> cfg.class_count) || key != "classes") throw ParseError("checkpoint: missing class count");
    if (!(in >> key) || key != "widths") throw ParseError("checkpoint: missing widths");
    std::getline(in, line);
    std::istringstream ws(line);
    cfg.widths.clear();
    for (int w; ws >> w;) cfg.widths.push_back(w);
    int ctx = 0;
    if (!(in >> key >> ctx >> cfg.context_after >> cfg.knn_k) || key != "context")
        throw ParseError("checkpoint: missing context line");
    cfg.knn_context = ctx != 0;
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    PointNetLite net(cfg, 0);
    for (std::size_t l = 0; l < net.encoder().size(); ++l) read_layer(in, "encoder" + std::to_string(l), net.encoder()[l]);
    read_layer(in, "classifier", net.classifier());
    read_layer(in, "segmenter", net.segmenter());
    return net;
}

void save_checkpoint(const PointNetLite& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    save_checkpoint(net, out);
}

PointNetLite load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint " + path.string());
    return load_checkpoint(in);
}

}  // namespace boxseg
