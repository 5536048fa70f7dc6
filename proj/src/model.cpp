#include "owsm/model.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace owsm {

std::string encoder_type_name(EncoderType t) {
    switch (t) {
        case EncoderType::transformer: return "transformer";
        case EncoderType::conformer: return "conformer";
        case EncoderType::e_branchformer: return "e_branchformer";
    }
    throw std::logic_error("unknown encoder type");
}

EncoderType encoder_type_from_name(const std::string& name) {
    if (name == "transformer") return EncoderType::transformer;
    if (name == "conformer") return EncoderType::conformer;
    if (name == "e_branchformer") return EncoderType::e_branchformer;
    throw std::invalid_argument("unknown encoder type: " + name);
}

void ModelConfig::validate() const {
    if (hidden < 2 || hidden % 2 != 0) throw std::invalid_argument("config: hidden must be even and >= 2");
    if (heads < 1 || hidden % heads != 0) throw std::invalid_argument("config: hidden must be divisible by heads");
    if (enc_layers < 1 || dec_layers < 1) throw std::invalid_argument("config: need at least one layer per stack");
    if (time_shift_ms % 10 != 0) throw std::invalid_argument("config: time shift must be a multiple of the 10 ms frame rate");
    const int f = time_shift_ms / 10;
    if (f != 2 && f != 4) throw std::invalid_argument("config: time shift must be 20 or 40 ms");
    if (merge_kernel % 2 == 0) throw std::invalid_argument("config: merge kernel must be odd");
    if (conv_kernel % 2 == 0) throw std::invalid_argument("config: conv kernel must be odd");
    if (resolved_cgmlp_dim() % 2 != 0) throw std::invalid_argument("config: cgMLP dim must be even");
    if (resolved_ffn_dim() < 1) throw std::invalid_argument("config: ffn dim must be positive");
    if (vocab_size < 2) throw std::invalid_argument("config: vocab size must be set");
    if (max_audio_s != 30) throw std::invalid_argument("config: window length is fixed at 30 s");
}

std::string ModelConfig::to_json() const {
    nlohmann::ordered_json j;
    j["encoder_type"] = encoder_type_name(encoder_type);
    j["enc_layers"] = enc_layers;
    j["dec_layers"] = dec_layers;
    j["hidden"] = hidden;
    j["heads"] = heads;
    j["time_shift_ms"] = time_shift_ms;
    j["ffn_expansion"] = ffn_expansion;
    j["ffn_dim"] = ffn_dim;
    j["cgmlp_expansion"] = cgmlp_expansion;
    j["cgmlp_dim"] = cgmlp_dim;
    j["merge_kernel"] = merge_kernel;
    j["conv_kernel"] = conv_kernel;
    j["vocab_size"] = vocab_size;
    j["max_audio_s"] = max_audio_s;
    j["languages"] = languages;
    j["st_targets"] = st_targets;
    return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.encoder_type = encoder_type_from_name(j.at("encoder_type").get<std::string>());
    c.enc_layers = j.at("enc_layers").get<int>();
    c.dec_layers = j.at("dec_layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.heads = j.at("heads").get<int>();
    c.time_shift_ms = j.at("time_shift_ms").get<int>();
    c.ffn_expansion = j.value("ffn_expansion", 4);
    c.ffn_dim = j.value("ffn_dim", 0);
    c.cgmlp_expansion = j.value("cgmlp_expansion", 6);
    c.cgmlp_dim = j.value("cgmlp_dim", 0);
    c.merge_kernel = j.value("merge_kernel", 31);
    c.conv_kernel = j.value("conv_kernel", 31);
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_audio_s = j.value("max_audio_s", 30);
    c.languages = j.value("languages", std::vector<std::string>{"eng"});
    c.st_targets = j.value("st_targets", std::vector<std::string>{});
    return c;
}

template <class Real>
TensorT<Real> sinusoidal_pe(int length, int dim) {
    if (dim % 2 != 0) throw std::invalid_argument("sinusoidal positional encoding requires an even dim");
    TensorT<Real> pe({length, dim});
    for (int i = 0; 2 * i < dim; ++i) {
        const double denom = std::pow(10000.0, (2.0 * i) / dim);
        for (int p = 0; p < length; ++p) {
            const double angle = p / denom;
            pe.at(p, 2 * i) = static_cast<Real>(std::sin(angle));
            pe.at(p, 2 * i + 1) = static_cast<Real>(std::cos(angle));
        }
    }
    return pe;
}

template TensorT<float> sinusoidal_pe<float>(int, int);
template TensorT<double> sinusoidal_pe<double>(int, int);

template <class Real>
ParameterT<Real>& ModelT<Real>::p(const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::out_of_range("no parameter named " + name);
    return params[it->second];
}

template <class Real>
const ParameterT<Real>& ModelT<Real>::p(const std::string& name) const {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::out_of_range("no parameter named " + name);
    return params[it->second];
}

template <class Real>
void ModelT<Real>::zero_grads() {
    for (auto& q : params) q.zero_grad();
}

template <class Real>
size_t ModelT<Real>::n_params() const {
    size_t n = 0;
    for (const auto& q : params) n += q.value.numel();
    return n;
}

template <class Real>
size_t count_params(const ModelT<Real>& m) {
    return m.n_params();
}

namespace {

// Registers parameters in a fixed order; the same order drives the init
// draws, so builds are reproducible given the seed.
template <class Real>
struct Builder {
    ModelT<Real>& m;
    SeededRng& rng;

    void weight(const std::string& name, std::vector<int> shape, int fan_in) {
        TensorT<Real> t(shape);
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (size_t i = 0; i < t.numel(); ++i) t.at(i) = static_cast<Real>(rng.uniform(-bound, bound));
        push(name, std::move(t));
    }
    void zeros(const std::string& name, std::vector<int> shape) { push(name, TensorT<Real>::zeros(std::move(shape))); }
    void ones(const std::string& name, std::vector<int> shape) {
        push(name, TensorT<Real>::full(std::move(shape), Real(1)));
    }
    void norm(const std::string& pfx, int dim) {
        ones(pfx + ".g", {dim});
        zeros(pfx + ".b", {dim});
    }
    void linear(const std::string& pfx, int in, int out) {
        weight(pfx + ".w", {in, out}, in);
        zeros(pfx + ".b", {out});
    }
    void ffn(const std::string& pfx, int d, int f) {
        norm(pfx + ".norm", d);
        linear(pfx + ".w1", d, f);
        linear(pfx + ".w2", f, d);
    }
    void attn(const std::string& pfx, int d) {
        norm(pfx + ".norm", d);
        linear(pfx + ".q", d, d);
        linear(pfx + ".k", d, d);
        linear(pfx + ".v", d, d);
        linear(pfx + ".o", d, d);
    }

    void push(const std::string& name, TensorT<Real> t) {
        if (m.by_name.count(name)) throw std::logic_error("duplicate parameter " + name);
        m.by_name[name] = m.params.size();
        m.params.emplace_back(name, std::move(t));
    }
};

} // namespace

template <class Real>
ModelT<Real> build_model(const ModelConfig& cfg, SeededRng& rng) {
    cfg.validate();
    ModelT<Real> m;
    m.cfg = cfg;
    Builder<Real> b{m, rng};

    const int d = cfg.hidden;
    const int f = cfg.resolved_ffn_dim();
    const int e = cfg.resolved_cgmlp_dim();
    const int V = cfg.vocab_size;

    b.linear("front.stage1", 3 * kFeatureDim, d);
    if (cfg.subsample_factor() == 4) b.linear("front.stage2", 3 * d, d);
    b.linear("front.proj", d, d);

    for (int i = 0; i < cfg.enc_layers; ++i) {
        const std::string pfx = "enc." + std::to_string(i) + ".";
        switch (cfg.encoder_type) {
            case EncoderType::transformer:
                b.attn(pfx + "attn", d);
                b.ffn(pfx + "ffn", d, f);
                break;
            case EncoderType::conformer:
                b.ffn(pfx + "ff1", d, f);
                b.attn(pfx + "attn", d);
                b.norm(pfx + "conv.norm", d);
                b.linear(pfx + "conv.pw1", d, 2 * d);
                b.weight(pfx + "conv.dw.w", {cfg.conv_kernel, d}, cfg.conv_kernel);
                b.zeros(pfx + "conv.dw.b", {d});
                b.linear(pfx + "conv.pw2", d, d);
                b.ffn(pfx + "ff2", d, f);
                b.norm(pfx + "final_norm", d);
                break;
            case EncoderType::e_branchformer:
                b.ffn(pfx + "ff1", d, f);
                b.attn(pfx + "attn", d);
                b.norm(pfx + "cgmlp.norm", d);
                b.linear(pfx + "cgmlp.up", d, e);
                b.norm(pfx + "cgmlp.gate_norm", e / 2);
                b.weight(pfx + "cgmlp.dw.w", {cfg.conv_kernel, e / 2}, cfg.conv_kernel);
                b.zeros(pfx + "cgmlp.dw.b", {e / 2});
                b.linear(pfx + "cgmlp.down", e / 2, d);
                b.weight(pfx + "merge.dw.w", {cfg.merge_kernel, 2 * d}, cfg.merge_kernel);
                b.zeros(pfx + "merge.dw.b", {2 * d});
                b.linear(pfx + "merge.proj", 2 * d, d);
                b.ffn(pfx + "ff2", d, f);
                b.norm(pfx + "final_norm", d);
                break;
        }
    }
    b.norm("enc.after_norm", d);

    b.weight("dec.embed", {V, d}, d);
    const int df = cfg.ffn_expansion * d; // decoder FFN is not budget-tuned
    for (int i = 0; i < cfg.dec_layers; ++i) {
        const std::string pfx = "dec." + std::to_string(i) + ".";
        b.attn(pfx + "self", d);
        b.attn(pfx + "cross", d);
        b.ffn(pfx + "ffn", d, df);
    }
    b.norm("dec.after_norm", d);
    b.linear("dec.out", d, V);
    return m;
}

namespace {

template <class Real>
using Id = typename Graph<Real>::Id;

template <class Real>
Id<Real> linear(ModelT<Real>& m, Graph<Real>& g, const std::string& pfx, Id<Real> x) {
    return g.add_rowvec(g.matmul(x, g.use(m.p(pfx + ".w"))), g.use(m.p(pfx + ".b")));
}

template <class Real>
Id<Real> layer_norm_p(ModelT<Real>& m, Graph<Real>& g, const std::string& pfx, Id<Real> x) {
    return g.layer_norm(x, g.use(m.p(pfx + ".g")), g.use(m.p(pfx + ".b")));
}

enum class Act { gelu, silu };

template <class Real>
Id<Real> ffn(ModelT<Real>& m, Graph<Real>& g, const std::string& pfx, Id<Real> x, Act act) {
    Id<Real> h = linear(m, g, pfx + ".w1", layer_norm_p(m, g, pfx + ".norm", x));
    h = (act == Act::gelu) ? g.gelu(h) : g.silu(h);
    return linear(m, g, pfx + ".w2", h);
}

// Multi-head scaled-dot-product attention; queries from x_q, keys/values
// from x_kv. Heads are contiguous column blocks.
template <class Real>
Id<Real> attention(ModelT<Real>& m, Graph<Real>& g, const std::string& pfx, Id<Real> x_q, Id<Real> x_kv, bool causal) {
    const int d = m.cfg.hidden;
    const int H = m.cfg.heads;
    const int dh = d / H;
    Id<Real> q = linear(m, g, pfx + ".q", x_q);
    Id<Real> k = linear(m, g, pfx + ".k", x_kv);
    Id<Real> v = linear(m, g, pfx + ".v", x_kv);
    const Real inv_sqrt_dh = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dh)));
    Id<Real> ctx = -1;
    for (int h = 0; h < H; ++h) {
        Id<Real> qh = g.slice_cols(q, h * dh, (h + 1) * dh);
        Id<Real> kh = g.slice_cols(k, h * dh, (h + 1) * dh);
        Id<Real> vh = g.slice_cols(v, h * dh, (h + 1) * dh);
        Id<Real> s = g.scale(g.matmul_nt(qh, kh), inv_sqrt_dh);
        if (causal) s = g.causal_mask(s);
        Id<Real> ch = g.matmul(g.softmax_rows(s), vh);
        ctx = (h == 0) ? ch : g.concat_cols(ctx, ch);
    }
    return linear(m, g, pfx + ".o", ctx);
}

template <class Real>
Id<Real> dwconv_p(ModelT<Real>& m, Graph<Real>& g, const std::string& pfx, Id<Real> x) {
    return g.add_rowvec(g.dwconv(x, g.use(m.p(pfx + ".w"))), g.use(m.p(pfx + ".b")));
}

// Convolutional gating MLP: up-project, gelu, split; the gate half is
// layer-normed and depthwise-convolved, then multiplied into the other half.
template <class Real>
Id<Real> cgmlp(ModelT<Real>& m, Graph<Real>& g, const std::string& pfx, Id<Real> x) {
    const int e = m.cfg.resolved_cgmlp_dim();
    Id<Real> u = g.gelu(linear(m, g, pfx + ".up", x));
    Id<Real> a = g.slice_cols(u, 0, e / 2);
    Id<Real> gate = g.slice_cols(u, e / 2, e);
    gate = layer_norm_p(m, g, pfx + ".gate_norm", gate);
    gate = dwconv_p(m, g, pfx + ".dw", gate);
    return linear(m, g, pfx + ".down", g.mul(a, gate));
}

template <class Real>
Id<Real> transformer_block(ModelT<Real>& m, Graph<Real>& g, const std::string& pfx, Id<Real> x) {
    Id<Real> n = layer_norm_p(m, g, pfx + "attn.norm", x);
    x = g.add(x, attention(m, g, pfx + "attn", n, n, false));
    x = g.add(x, ffn(m, g, pfx + "ffn", x, Act::gelu));
    return x;
}

template <class Real>
Id<Real> conformer_block(ModelT<Real>& m, Graph<Real>& g, const std::string& pfx, Id<Real> x) {
    const int d = m.cfg.hidden;
    x = g.add(x, g.scale(ffn(m, g, pfx + "ff1", x, Act::silu), Real(0.5)));
    {
        Id<Real> n = layer_norm_p(m, g, pfx + "attn.norm", x);
        x = g.add(x, attention(m, g, pfx + "attn", n, n, false));
    }
    {
        Id<Real> n = layer_norm_p(m, g, pfx + "conv.norm", x);
        Id<Real> u = linear(m, g, pfx + "conv.pw1", n);
        Id<Real> a = g.slice_cols(u, 0, d);
        Id<Real> gate = g.sigmoid(g.slice_cols(u, d, 2 * d));
        Id<Real> vconv = dwconv_p(m, g, pfx + "conv.dw", g.mul(a, gate));
        x = g.add(x, linear(m, g, pfx + "conv.pw2", g.silu(vconv)));
    }
    x = g.add(x, g.scale(ffn(m, g, pfx + "ff2", x, Act::silu), Real(0.5)));
    return layer_norm_p(m, g, pfx + "final_norm", x);
}

template <class Real>
Id<Real> ebranchformer_block(ModelT<Real>& m, Graph<Real>& g, const std::string& pfx, Id<Real> x) {
    x = g.add(x, g.scale(ffn(m, g, pfx + "ff1", x, Act::silu), Real(0.5)));
    Id<Real> attn_in = layer_norm_p(m, g, pfx + "attn.norm", x);
    Id<Real> global_branch = attention(m, g, pfx + "attn", attn_in, attn_in, false);
    Id<Real> local_branch = cgmlp(m, g, pfx + "cgmlp", layer_norm_p(m, g, pfx + "cgmlp.norm", x));
    Id<Real> both = g.concat_cols(global_branch, local_branch);
    Id<Real> merged = g.add(both, dwconv_p(m, g, pfx + "merge.dw", both));
    x = g.add(x, linear(m, g, pfx + "merge.proj", merged));
    x = g.add(x, g.scale(ffn(m, g, pfx + "ff2", x, Act::silu), Real(0.5)));
    return layer_norm_p(m, g, pfx + "final_norm", x);
}

} // namespace

template <class Real>
typename Graph<Real>::Id subsample_frontend(ModelT<Real>& m, Graph<Real>& g, typename Graph<Real>::Id features) {
    const auto& feats = g.value(features);
    if (feats.rank() != 2 || feats.dim(1) != kFeatureDim)
        throw std::invalid_argument("frontend: expected [T, 80] features, got " + shape_str(feats.shape()));
    const int T = feats.dim(0);
    const int factor = m.cfg.subsample_factor();
    if (T / factor < 1) throw std::invalid_argument("frontend: input shorter than one output frame");

    Id<Real> h = g.gelu(linear(m, g, "front.stage1", g.unfold_k3_s2(features)));
    if (factor == 4) h = g.gelu(linear(m, g, "front.stage2", g.unfold_k3_s2(h)));
    h = linear(m, g, "front.proj", h);
    const int t_out = g.value(h).dim(0);
    return g.add(h, g.leaf(sinusoidal_pe<Real>(t_out, m.cfg.hidden)));
}

template <class Real>
typename Graph<Real>::Id encoder_block(ModelT<Real>& m, Graph<Real>& g, int layer, typename Graph<Real>::Id x) {
    const std::string pfx = "enc." + std::to_string(layer) + ".";
    switch (m.cfg.encoder_type) {
        case EncoderType::transformer: return transformer_block(m, g, pfx, x);
        case EncoderType::conformer: return conformer_block(m, g, pfx, x);
        case EncoderType::e_branchformer: return ebranchformer_block(m, g, pfx, x);
    }
    throw std::logic_error("unknown encoder type");
}

template <class Real>
typename Graph<Real>::Id encoder_forward(ModelT<Real>& m, Graph<Real>& g, typename Graph<Real>::Id features) {
    Id<Real> x = subsample_frontend(m, g, features);
    for (int i = 0; i < m.cfg.enc_layers; ++i) x = encoder_block(m, g, i, x);
    return layer_norm_p(m, g, "enc.after_norm", x);
}

template <class Real>
typename Graph<Real>::Id decoder_forward(ModelT<Real>& m, Graph<Real>& g, const std::vector<int>& tokens,
                                         typename Graph<Real>::Id enc_frames) {
    if (tokens.empty()) throw std::invalid_argument("decoder: need at least one input token");
    const int d = m.cfg.hidden;
    const int L = static_cast<int>(tokens.size());
    Id<Real> x = g.scale(g.embedding(tokens, g.use(m.p("dec.embed"))), static_cast<Real>(std::sqrt(double(d))));
    x = g.add(x, g.leaf(sinusoidal_pe<Real>(L, d)));
    for (int i = 0; i < m.cfg.dec_layers; ++i) {
        const std::string pfx = "dec." + std::to_string(i) + ".";
        Id<Real> n = layer_norm_p(m, g, pfx + "self.norm", x);
        x = g.add(x, attention(m, g, pfx + "self", n, n, true));
        x = g.add(x, attention(m, g, pfx + "cross", layer_norm_p(m, g, pfx + "cross.norm", x), enc_frames, false));
        x = g.add(x, ffn(m, g, pfx + "ffn", x, Act::gelu));
    }
    x = layer_norm_p(m, g, "dec.after_norm", x);
    return linear(m, g, "dec.out", x);
}

template struct ModelT<float>;
template struct ModelT<double>;
template ModelT<float> build_model<float>(const ModelConfig&, SeededRng&);
template ModelT<double> build_model<double>(const ModelConfig&, SeededRng&);
template size_t count_params<float>(const ModelT<float>&);
template size_t count_params<double>(const ModelT<double>&);
template Graph<float>::Id subsample_frontend<float>(ModelT<float>&, Graph<float>&, Graph<float>::Id);
template Graph<double>::Id subsample_frontend<double>(ModelT<double>&, Graph<double>&, Graph<double>::Id);
template Graph<float>::Id encoder_block<float>(ModelT<float>&, Graph<float>&, int, Graph<float>::Id);
template Graph<double>::Id encoder_block<double>(ModelT<double>&, Graph<double>&, int, Graph<double>::Id);
template Graph<float>::Id encoder_forward<float>(ModelT<float>&, Graph<float>&, Graph<float>::Id);
template Graph<double>::Id encoder_forward<double>(ModelT<double>&, Graph<double>&, Graph<double>::Id);
template Graph<float>::Id decoder_forward<float>(ModelT<float>&, Graph<float>&, const std::vector<int>&, Graph<float>::Id);
template Graph<double>::Id decoder_forward<double>(ModelT<double>&, Graph<double>&, const std::vector<int>&,
                                                   Graph<double>::Id);

} // namespace owsm
