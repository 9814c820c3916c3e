#include "mgrpo/tasks.hpp"

#include <algorithm>
#include <stdexcept>

#include "mgrpo/rng.hpp"

namespace mgrpo {

std::string task_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::sort_digits:
            return "sort_digits";
        case TaskKind::reverse_copy:
            return "reverse_copy";
        case TaskKind::mod_sum:
            return "mod_sum";
    }
    return "?";
}

TaskKind task_from_name(const std::string& name) {
    if (name == "sort_digits") {
        return TaskKind::sort_digits;
    }
    if (name == "reverse_copy") {
        return TaskKind::reverse_copy;
    }
    if (name == "mod_sum") {
        return TaskKind::mod_sum;
    }
    throw std::invalid_argument("unknown task: " + name);
}

void TaskSpec::validate(const Vocab& vocab) const {
    if (prompt_min < 1 || prompt_max < prompt_min) {
        throw std::invalid_argument("task: bad prompt length range");
    }
    if (kind == TaskKind::reverse_copy && prompt_max > vocab.size - vocab.letter0) {
        throw std::invalid_argument("task: reverse_copy payload exceeds letter alphabet");
    }
    const int max_answer = kind == TaskKind::mod_sum ? 1 : prompt_max;
    if (completion_len < max_answer + 2) {
        throw std::invalid_argument("task: completion_len too short for answer plus delimiters");
    }
}

Example gen_example(const TaskSpec& task, const Vocab& vocab, uint64_t seed) {
    Rng rng(mix64(seed, 0x7a5cull));
    std::vector<int32_t> payload;
    std::vector<int32_t> answer;
    switch (task.kind) {
        case TaskKind::sort_digits: {
            const int n = rng.range_int(task.prompt_min, task.prompt_max);
            for (int i = 0; i < n; ++i) {
                payload.push_back(vocab.digit(rng.range_int(0, 9)));
            }
            answer = payload;
            std::sort(answer.begin(), answer.end());
            break;
        }
        case TaskKind::reverse_copy: {
            const int n = rng.range_int(task.prompt_min, task.prompt_max);
            for (int i = 0; i < n; ++i) {
                payload.push_back(vocab.letter(rng.range_int(0, vocab.size - vocab.letter0 - 1)));
            }
            answer.assign(payload.rbegin(), payload.rend());
            break;
        }
        case TaskKind::mod_sum: {
            const int a = rng.range_int(0, 9);
            const int b = rng.range_int(0, 9);
            payload = {vocab.digit(a), vocab.plus_id, vocab.digit(b)};
            answer = {vocab.digit((a + b) % 10)};
            break;
        }
    }
    Example ex;
    const int width = task.prompt_width();
    ex.prompt.ids.assign(static_cast<size_t>(width), vocab.pad_id);
    const int start = width - 1 - static_cast<int>(payload.size());
    for (size_t i = 0; i < payload.size(); ++i) {
        ex.prompt.ids[static_cast<size_t>(start) + i] = payload[i];
    }
    ex.prompt.ids[static_cast<size_t>(width - 1)] = vocab.eq_id;
    ex.prompt.prompt_len = width;
    ex.answer = std::move(answer);
    return ex;
}

std::vector<int32_t> target_completion(const TaskSpec& task, const Vocab& vocab, const std::vector<int32_t>& answer) {
    if (static_cast<int>(answer.size()) + 2 > task.completion_len) {
        throw std::invalid_argument("target_completion: answer does not fit");
    }
    std::vector<int32_t> out;
    out.reserve(static_cast<size_t>(task.completion_len));
    out.push_back(vocab.ans_open);
    out.insert(out.end(), answer.begin(), answer.end());
    out.push_back(vocab.ans_close);
    out.resize(static_cast<size_t>(task.completion_len), vocab.pad_id);
    return out;
}

RewardBreakdown reward(const TokenSeq& completion, const std::vector<int32_t>& answer, const RewardSpec& spec,
                       const Vocab& vocab) {
    RewardBreakdown out;
    const auto begin = completion.ids.begin() + completion.prompt_len;
    const auto end = completion.ids.end();
    int n_open = 0;
    int n_close = 0;
    auto first_open = end;
    for (auto it = begin; it != end; ++it) {
        if (*it == vocab.ans_open) {
            ++n_open;
            if (first_open == end) {
                first_open = it;
            }
        } else if (*it == vocab.ans_close) {
            ++n_close;
        }
    }
    // Extraction: first enclosed span. Extra delimiter spans forfeit the
    // format component but extraction still uses the first span.
    if (first_open != end) {
        auto close_it = std::find(first_open + 1, end, vocab.ans_close);
        if (close_it != end) {
            out.correct = std::equal(first_open + 1, close_it, answer.begin(), answer.end());
            const auto open_pos = first_open - begin;
            const auto close_pos = close_it - begin;
            out.well_formed = n_open == 1 && n_close == 1 && open_pos < close_pos;
        }
    }
    out.total = (out.correct ? spec.correct_weight : 0.0) + (out.well_formed ? spec.format_weight : 0.0);
    return out;
}

}  // namespace mgrpo
