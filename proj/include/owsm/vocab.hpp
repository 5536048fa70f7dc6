#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace owsm {

// Timestamp tokens cover [0, 30] s at 0.02 s steps: <t0.00> .. <t30.00>.
constexpr double kTimestampStepS = 0.02;
constexpr double kMaxAudioS = 30.0;
constexpr int kTimestampCount = 1501;

// Token inventory: character-level text tokens plus the special tokens the
// multitask format needs. Id assignment order is fixed — text, control,
// languages, tasks, timestamps — so two builds from the same inputs agree.
class Vocabulary {
public:
    // languages/st_targets are ISO 639-3 lowercase codes. "cmn" is rejected;
    // transcripts tagged cmn are mapped to zho before reaching the vocab.
    static Vocabulary build(const std::vector<std::string>& languages,
                            const std::vector<std::string>& st_targets,
                            const std::string& charset = default_charset());

    static std::string default_charset(); // printable ASCII, space first

    int size() const { return static_cast<int>(names_.size()); }

    int sos() const { return sos_; }
    int eos() const { return eos_; }
    int sop() const { return sop_; }
    int notimestamps() const { return notimestamps_; }

    // Contiguous language block [first, last]; enables restricted argmax.
    std::pair<int, int> language_range() const { return {lang_first_, lang_first_ + n_langs_ - 1}; }
    std::pair<int, int> timestamp_range() const { return {ts_first_, ts_first_ + kTimestampCount - 1}; }

    int language_id(const std::string& code) const;
    int task_id(const std::string& task) const; // "asr" or "st_<code>"
    std::optional<int> char_id(char c) const;

    bool is_language(int id) const { return id >= lang_first_ && id < lang_first_ + n_langs_; }
    bool is_timestamp(int id) const { return id >= ts_first_ && id < ts_first_ + kTimestampCount; }
    bool is_task(int id) const { return id >= task_first_ && id < task_first_ + n_tasks_; }
    bool is_text(int id) const { return id >= 0 && id < n_text_; }
    bool is_special(int id) const { return !is_text(id); }

    // Nearest-step quantization; t must lie in [0, 30] s.
    int timestamp_id(double seconds) const;
    double timestamp_seconds(int id) const;

    const std::string& name(int id) const { return names_[static_cast<size_t>(id)]; }
    std::string language_code(int id) const; // strips <>
    std::string task_name(int id) const;

    std::string to_json() const;
    static Vocabulary from_json(const std::string& text);

    const std::vector<std::string>& languages() const { return languages_; }
    const std::vector<std::string>& st_targets() const { return st_targets_; }
    const std::string& charset() const { return charset_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> by_name_;
    std::string charset_;
    std::vector<std::string> languages_;
    std::vector<std::string> st_targets_;
    int n_text_ = 0;
    int sos_ = -1, eos_ = -1, sop_ = -1, notimestamps_ = -1;
    int lang_first_ = -1, n_langs_ = 0;
    int task_first_ = -1, n_tasks_ = 0;
    int ts_first_ = -1;
};

} // namespace owsm
