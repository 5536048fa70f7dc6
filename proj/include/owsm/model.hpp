#pragma once

#include "owsm/graph.hpp"
#include "owsm/rng.hpp"
#include "owsm/tensor.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace owsm {

enum class EncoderType { transformer, conformer, e_branchformer };

std::string encoder_type_name(EncoderType t);
EncoderType encoder_type_from_name(const std::string& name);

// Architecture knobs. The input is always 80-dim log-mel at 10 ms frames;
// time_shift_ms picks the frontend subsampling (20 ms -> one stride-2 stage,
// 40 ms -> two).
struct ModelConfig {
    EncoderType encoder_type = EncoderType::e_branchformer;
    int enc_layers = 2;
    int dec_layers = 2;
    int hidden = 64;
    int heads = 4;
    int time_shift_ms = 40;
    int ffn_expansion = 4;
    int ffn_dim = 0; // 0 -> ffn_expansion * hidden; explicit value overrides
    int cgmlp_expansion = 6;
    int cgmlp_dim = 0; // 0 -> cgmlp_expansion * hidden (must be even)
    int merge_kernel = 31;
    int conv_kernel = 31; // depthwise kernel inside conformer conv / cgMLP gate
    int vocab_size = 0;
    int max_audio_s = 30;

    // Vocabulary inputs, kept here so a checkpoint is self-describing.
    std::vector<std::string> languages{"eng"};
    std::vector<std::string> st_targets{};

    void validate() const;
    int subsample_factor() const { return time_shift_ms / 10; }
    int resolved_ffn_dim() const { return ffn_dim > 0 ? ffn_dim : ffn_expansion * hidden; }
    int resolved_cgmlp_dim() const { return cgmlp_dim > 0 ? cgmlp_dim : cgmlp_expansion * hidden; }

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

constexpr int kFeatureDim = 80;
constexpr int kFramesPerSecond = 100;

// PE[p, 2i] = sin(p / 10000^(2i/dim)), PE[p, 2i+1] = cos(same). dim even.
template <class Real>
TensorT<Real> sinusoidal_pe(int length, int dim);

template <class Real>
struct ModelT {
    ModelConfig cfg;
    std::vector<ParameterT<Real>> params;
    std::unordered_map<std::string, size_t> by_name;

    ParameterT<Real>& p(const std::string& name);
    const ParameterT<Real>& p(const std::string& name) const;
    void zero_grads();
    size_t n_params() const;

    template <class Other>
    ModelT<Other> cast() const {
        ModelT<Other> m;
        m.cfg = cfg;
        m.params.reserve(params.size());
        for (const auto& q : params) m.params.emplace_back(q.name, q.value.template cast<Other>());
        m.by_name = by_name;
        return m;
    }
};

using Model = ModelT<float>;

template <class Real>
ModelT<Real> build_model(const ModelConfig& cfg, SeededRng& rng);

template <class Real>
size_t count_params(const ModelT<Real>& m);

// Graph builders. All of them append to g and return the output node.
// Shapes: features [T, 80], block in/out [T', hidden], decoder out [L, vocab].

template <class Real>
typename Graph<Real>::Id subsample_frontend(ModelT<Real>& m, Graph<Real>& g, typename Graph<Real>::Id features);

template <class Real>
typename Graph<Real>::Id encoder_block(ModelT<Real>& m, Graph<Real>& g, int layer, typename Graph<Real>::Id x);

template <class Real>
typename Graph<Real>::Id encoder_forward(ModelT<Real>& m, Graph<Real>& g, typename Graph<Real>::Id features);

template <class Real>
typename Graph<Real>::Id decoder_forward(ModelT<Real>& m, Graph<Real>& g, const std::vector<int>& tokens,
                                         typename Graph<Real>::Id enc_frames);

} // namespace owsm
