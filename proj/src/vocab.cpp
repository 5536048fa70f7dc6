#include "owsm/vocab.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace owsm {

namespace {

std::string timestamp_name(int step) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "<t%.2f>", step * kTimestampStepS);
    return buf;
}

} // namespace

std::string Vocabulary::default_charset() {
    std::string s;
    for (char c = ' '; c <= '~'; ++c) s.push_back(c);
    return s;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& languages, const std::vector<std::string>& st_targets,
                             const std::string& charset) {
    Vocabulary v;
    v.charset_ = charset;
    v.languages_ = languages;
    v.st_targets_ = st_targets;

    auto push = [&v](const std::string& name) {
        if (v.by_name_.count(name)) throw std::invalid_argument("vocabulary: duplicate token " + name);
        v.by_name_[name] = static_cast<int>(v.names_.size());
        v.names_.push_back(name);
    };

    for (char c : charset) push(std::string(1, c));
    v.n_text_ = static_cast<int>(v.names_.size());

    push("<sos>");
    v.sos_ = v.size() - 1;
    push("<eos>");
    v.eos_ = v.size() - 1;
    push("<sop>");
    v.sop_ = v.size() - 1;
    push("<notimestamps>");
    v.notimestamps_ = v.size() - 1;

    v.lang_first_ = v.size();
    std::set<std::string> seen;
    for (const auto& code : languages) {
        if (code == "cmn")
            throw std::invalid_argument("vocabulary: language code cmn is merged into zho; list zho instead");
        if (!seen.insert(code).second) throw std::invalid_argument("vocabulary: duplicate language code " + code);
        push("<" + code + ">");
    }
    v.n_langs_ = static_cast<int>(languages.size());

    v.task_first_ = v.size();
    push("<asr>");
    for (const auto& code : st_targets) {
        if (code == "cmn")
            throw std::invalid_argument("vocabulary: language code cmn is merged into zho; list zho instead");
        push("<st_" + code + ">");
    }
    v.n_tasks_ = 1 + static_cast<int>(st_targets.size());

    v.ts_first_ = v.size();
    for (int i = 0; i < kTimestampCount; ++i) push(timestamp_name(i));
    return v;
}

int Vocabulary::language_id(const std::string& code) const {
    auto it = by_name_.find("<" + code + ">");
    if (it == by_name_.end() || !is_language(it->second))
        throw std::invalid_argument("vocabulary: unknown language code " + code);
    return it->second;
}

int Vocabulary::task_id(const std::string& task) const {
    auto it = by_name_.find("<" + task + ">");
    if (it == by_name_.end() || !is_task(it->second)) throw std::invalid_argument("vocabulary: unknown task " + task);
    return it->second;
}

std::optional<int> Vocabulary::char_id(char c) const {
    auto it = by_name_.find(std::string(1, c));
    if (it == by_name_.end() || it->second >= n_text_) return std::nullopt;
    return it->second;
}

int Vocabulary::timestamp_id(double seconds) const {
    if (seconds < 0.0 || seconds > kMaxAudioS)
        throw std::out_of_range("timestamp " + std::to_string(seconds) + " s outside [0, 30] s");
    const int step = static_cast<int>(std::lround(seconds / kTimestampStepS));
    return ts_first_ + step;
}

double Vocabulary::timestamp_seconds(int id) const {
    if (!is_timestamp(id)) throw std::invalid_argument("token " + std::to_string(id) + " is not a timestamp");
    return (id - ts_first_) * kTimestampStepS;
}

std::string Vocabulary::language_code(int id) const {
    if (!is_language(id)) throw std::invalid_argument("token " + std::to_string(id) + " is not a language");
    const std::string& n = names_[static_cast<size_t>(id)];
    return n.substr(1, n.size() - 2);
}

std::string Vocabulary::task_name(int id) const {
    if (!is_task(id)) throw std::invalid_argument("token " + std::to_string(id) + " is not a task");
    const std::string& n = names_[static_cast<size_t>(id)];
    return n.substr(1, n.size() - 2);
}

std::string Vocabulary::to_json() const {
    nlohmann::ordered_json j;
    j["charset"] = charset_;
    j["languages"] = languages_;
    j["st_targets"] = st_targets_;
    nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
    for (int id = 0; id < size(); ++id) {
        const char* role = "text";
        if (id == sos_ || id == eos_ || id == sop_ || id == notimestamps_) role = "control";
        else if (is_language(id)) role = "language";
        else if (is_task(id)) role = "task";
        else if (is_timestamp(id)) role = "timestamp";
        tokens.push_back({{"id", id}, {"token", names_[static_cast<size_t>(id)]}, {"role", role}});
    }
    j["tokens"] = tokens;
    return j.dump(2);
}

Vocabulary Vocabulary::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    return build(j.at("languages").get<std::vector<std::string>>(),
                 j.at("st_targets").get<std::vector<std::string>>(), j.at("charset").get<std::string>());
}

} // namespace owsm
