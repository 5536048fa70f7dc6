#pragma once

#include "owsm/model.hpp"
#include "owsm/tensor.hpp"
#include "owsm/vocab.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace owsm {

struct EncoderOutput {
    Tensor frames; // [T', hidden]
    int frame_duration_ms = 40;
};

// What the decoding loops need from a model: encode a 30 s feature window
// once, then score the next token given the running prefix. Test stubs
// implement this directly; NetSpeechModel wraps a trained network.
class SpeechModel {
public:
    virtual ~SpeechModel() = default;
    virtual const Vocabulary& vocab() const = 0;
    virtual EncoderOutput encode(const Tensor& features) const = 0;
    virtual std::vector<float> next_logits(const std::vector<int>& tokens, const EncoderOutput& enc) const = 0;
};

class NetSpeechModel : public SpeechModel {
public:
    NetSpeechModel(Model net, Vocabulary vocab);

    const Vocabulary& vocab() const override { return vocab_; }
    EncoderOutput encode(const Tensor& features) const override;
    std::vector<float> next_logits(const std::vector<int>& tokens, const EncoderOutput& enc) const override;

    const Model& net() const { return net_; }

private:
    // Inference graphs only read parameter values; const methods never
    // mutate the network.
    mutable Model net_;
    Vocabulary vocab_;
};

struct DecodeOptions {
    std::string task = "asr";
    std::optional<std::string> lang; // absent -> predict via the language block
    std::optional<std::string> prompt;
    int max_tokens = 448;
    bool with_timestamps = false;
};

struct DecodeResult {
    std::vector<int> tokens; // full sequence: forced prefix + generated
    std::string text;        // detokenized non-special tokens
    std::vector<std::pair<double, double>> timestamps;
    std::string lang; // forced or predicted
    int token_count = 0; // generated tokens only
    bool truncated = false;
    double wall_time_ms = 0.0;
};

// Greedy argmax decoding; ties break toward the lowest token id. Pure in
// (model, features, opts).
DecodeResult greedy_decode(const SpeechModel& model, const Tensor& features, const DecodeOptions& opts);

// One decoder step after <sos>, argmax restricted to the language block.
std::string lid_predict(const SpeechModel& model, const Tensor& features);

struct WindowTrace {
    double start_s = 0.0;
    std::string text;
    std::optional<double> last_timestamp_s;
};

struct LongFormResult {
    DecodeResult result;     // concatenated transcript, merged timestamps
    std::vector<WindowTrace> windows;
};

// Chunked decoding of arbitrary-length audio: 30 s windows, each advanced
// by the last predicted end timestamp. Degenerate timestamp output falls
// back to a full-window shift; any timestamp advance is clamped to at least
// half a window so the iteration count stays within 2x the minimum.
LongFormResult long_form_decode(const SpeechModel& model, const Tensor& full_features, const DecodeOptions& opts);

// Joins the bias words into a single space-separated prompt, then decodes
// greedily.
DecodeResult biasing_decode(const SpeechModel& model, const Tensor& features,
                            const std::vector<std::string>& bias_words, const DecodeOptions& opts);

struct TimedSuite {
    std::vector<double> per_utterance_ms;
    double mean_ms = 0.0;
};

// Wall-clock per utterance; one warm-up decode of the first utterance is
// run and excluded.
TimedSuite timed_decode_suite(const SpeechModel& model, const std::vector<Tensor>& features,
                              const DecodeOptions& opts);

} // namespace owsm
