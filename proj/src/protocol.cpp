#include "owsm/protocol.hpp"

#include <cctype>
#include <stdexcept>

namespace owsm {

std::optional<NormalizedText> normalize_text(const std::string& text, const std::string& source_tag,
                                             const std::string& lang) {
    if (source_tag == "WSJ") return std::nullopt;
    NormalizedText out;
    out.lang = (lang == "cmn") ? "zho" : lang;
    if (source_tag == "AMI" || source_tag == "VoxForge") {
        out.text.reserve(text.size());
        for (unsigned char c : text) out.text.push_back(static_cast<char>(std::tolower(c)));
    } else {
        out.text = text;
    }
    return out;
}

namespace {

void append_text(std::vector<int>& tokens, const std::string& text, const Vocabulary& vocab) {
    for (char c : text) {
        auto id = vocab.char_id(c);
        if (!id) throw std::invalid_argument(std::string("cannot encode character '") + c + "' (not in vocabulary)");
        tokens.push_back(*id);
    }
}

} // namespace

FormattedSample encode_window(const std::vector<Utterance>& utterances, const std::string& lang,
                              const std::string& task, const std::optional<std::string>& prompt,
                              const Vocabulary& vocab) {
    if (utterances.empty()) throw std::invalid_argument("encode_window: no utterances");

    FormattedSample s;
    s.lang = lang;
    s.task_id = vocab.task_id(task);

    if (prompt) {
        s.tokens.push_back(vocab.sop());
        append_text(s.tokens, *prompt, vocab);
    }
    const size_t prompt_len = s.tokens.size();

    s.tokens.push_back(vocab.sos());
    s.tokens.push_back(vocab.language_id(lang));
    s.tokens.push_back(s.task_id);

    double prev_end = 0.0;
    for (const auto& u : utterances) {
        if (u.start_s < prev_end - 1e-9)
            throw std::invalid_argument("encode_window: timestamps must be nondecreasing");
        if (u.end_s < u.start_s) throw std::invalid_argument("encode_window: utterance ends before it starts");
        s.tokens.push_back(vocab.timestamp_id(u.start_s));
        append_text(s.tokens, u.text, vocab);
        s.tokens.push_back(vocab.timestamp_id(u.end_s));
        prev_end = u.end_s;
    }
    s.tokens.push_back(vocab.eos());

    s.supervised_mask.assign(s.tokens.size(), true);
    for (size_t i = 0; i < prompt_len; ++i) s.supervised_mask[i] = false;
    return s;
}

FormattedSample encode_sequence(const std::string& text, const std::string& lang, const std::string& task,
                                std::optional<std::pair<double, double>> timestamps,
                                const std::optional<std::string>& prompt, const Vocabulary& vocab) {
    Utterance u;
    u.text = text;
    if (timestamps) {
        u.start_s = timestamps->first;
        u.end_s = timestamps->second;
        return encode_window({u}, lang, task, prompt, vocab);
    }
    // No timestamps: encode directly as a notimestamps sample.
    FormattedSample s;
    s.lang = lang;
    s.task_id = vocab.task_id(task);
    if (prompt) {
        s.tokens.push_back(vocab.sop());
        append_text(s.tokens, *prompt, vocab);
    }
    const size_t prompt_len = s.tokens.size();
    s.tokens.push_back(vocab.sos());
    s.tokens.push_back(vocab.language_id(lang));
    s.tokens.push_back(s.task_id);
    s.tokens.push_back(vocab.notimestamps());
    append_text(s.tokens, text, vocab);
    s.tokens.push_back(vocab.eos());
    s.supervised_mask.assign(s.tokens.size(), true);
    for (size_t i = 0; i < prompt_len; ++i) s.supervised_mask[i] = false;
    return s;
}

DecodedSample decode_sequence(const std::vector<int>& tokens, const Vocabulary& vocab) {
    DecodedSample d;
    size_t i = 0;
    if (i < tokens.size() && tokens[i] == vocab.sop()) {
        ++i;
        std::string p;
        while (i < tokens.size() && vocab.is_text(tokens[i])) p += vocab.name(tokens[i++]);
        d.prompt = p;
    }
    if (i >= tokens.size() || tokens[i] != vocab.sos())
        throw std::invalid_argument("decode_sequence: expected <sos> at position " + std::to_string(i));
    ++i;
    if (i >= tokens.size() || !vocab.is_language(tokens[i]))
        throw std::invalid_argument("decode_sequence: expected language token");
    d.lang = vocab.language_code(tokens[i++]);
    if (i >= tokens.size() || !vocab.is_task(tokens[i]))
        throw std::invalid_argument("decode_sequence: expected task token");
    d.task = vocab.task_name(tokens[i++]);

    bool with_ts = true;
    if (i < tokens.size() && tokens[i] == vocab.notimestamps()) {
        with_ts = false;
        ++i;
    }
    std::string current;
    std::optional<double> open_ts;
    bool in_utterance = false;
    for (; i < tokens.size() && tokens[i] != vocab.eos(); ++i) {
        const int t = tokens[i];
        if (vocab.is_text(t)) {
            current += vocab.name(t);
            in_utterance = true;
        } else if (vocab.is_timestamp(t)) {
            const double sec = vocab.timestamp_seconds(t);
            if (!open_ts) {
                open_ts = sec;
            } else {
                d.timestamps.emplace_back(*open_ts, sec);
                d.texts.push_back(current);
                current.clear();
                open_ts.reset();
                in_utterance = false;
            }
        } else {
            throw std::invalid_argument("decode_sequence: unexpected token " + vocab.name(t) + " in body");
        }
    }
    if (!with_ts || in_utterance || !current.empty()) {
        if (with_ts && open_ts) {
            // Dangling start timestamp: keep the text, mark an open-ended segment.
            d.timestamps.emplace_back(*open_ts, *open_ts);
        }
        if (!current.empty() || d.texts.empty()) d.texts.push_back(current);
    }
    for (size_t k = 0; k < d.texts.size(); ++k) {
        if (k) d.text += ' ';
        d.text += d.texts[k];
    }
    return d;
}

std::optional<std::string> sample_prompt(SeededRng& rng, const std::string& prev_sentence, double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("sample_prompt: probability must lie in [0, 1]");
    if (rng.uniform() < p) return prev_sentence;
    return std::nullopt;
}

std::vector<UtteranceWindow> segment_utterances(const std::vector<Utterance>& utterances) {
    std::vector<UtteranceWindow> windows;
    double prev_end = 0.0;
    for (const auto& u : utterances) {
        if (u.end_s < u.start_s) throw std::invalid_argument("segment_utterances: utterance ends before it starts");
        if (u.start_s < prev_end - 1e-9)
            throw std::invalid_argument("segment_utterances: utterances must be time-ordered and non-overlapping");
        if (u.end_s - u.start_s > kMaxAudioS)
            throw std::invalid_argument("segment_utterances: utterance longer than 30 s (splitting unsupported)");
        prev_end = u.end_s;

        if (windows.empty() || u.end_s - windows.back().window_start_s > kMaxAudioS) {
            windows.push_back({u.start_s, {}});
        }
        auto& w = windows.back();
        Utterance rebased = u;
        rebased.start_s -= w.window_start_s;
        rebased.end_s -= w.window_start_s;
        w.utterances.push_back(rebased);
    }
    return windows;
}

} // namespace owsm
