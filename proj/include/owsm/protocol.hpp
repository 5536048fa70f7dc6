#pragma once

#include "owsm/rng.hpp"
#include "owsm/vocab.hpp"

#include <optional>
#include <string>
#include <vector>

namespace owsm {

// One training/eval sample in the multitask token layout:
//   [sop, prompt...]? sos lang task (notimestamps | <ts> text <ts> ...) text... eos
// supervised_mask is false exactly on the [sop, prompt...] prefix.
struct FormattedSample {
    std::vector<int> tokens;
    std::vector<bool> supervised_mask;
    std::string lang;
    int task_id = -1;
};

struct Utterance {
    std::string text;
    double start_s = 0.0;
    double end_s = 0.0;
};

struct DecodedSample {
    std::vector<std::string> texts; // one per utterance in the window
    std::string text;               // texts joined by single spaces
    std::string lang;
    std::string task;
    std::vector<std::pair<double, double>> timestamps;
    std::optional<std::string> prompt;
};

// Corpus-conditional transcript preprocessing. Returns nullopt when the
// source is excluded from training entirely.
struct NormalizedText {
    std::string text;
    std::string lang;
};
std::optional<NormalizedText> normalize_text(const std::string& text, const std::string& source_tag,
                                             const std::string& lang);

FormattedSample encode_sequence(const std::string& text, const std::string& lang, const std::string& task,
                                std::optional<std::pair<double, double>> timestamps,
                                const std::optional<std::string>& prompt, const Vocabulary& vocab);

// Multi-utterance window; each utterance carries its own timestamp pair
// (already re-based to the window start).
FormattedSample encode_window(const std::vector<Utterance>& utterances, const std::string& lang,
                              const std::string& task, const std::optional<std::string>& prompt,
                              const Vocabulary& vocab);

DecodedSample decode_sequence(const std::vector<int>& tokens, const Vocabulary& vocab);

// Returns prev_sentence with probability p (draws one uniform from rng).
std::optional<std::string> sample_prompt(SeededRng& rng, const std::string& prev_sentence, double p);

struct UtteranceWindow {
    double window_start_s = 0.0;
    std::vector<Utterance> utterances; // timestamps re-based to window start
};

// Greedy packing of consecutive utterances into <= 30 s windows. Input must
// be time-ordered and non-overlapping; a single utterance longer than 30 s
// is an error.
std::vector<UtteranceWindow> segment_utterances(const std::vector<Utterance>& utterances);

} // namespace owsm
