#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgrpo/vocab.hpp"

namespace mgrpo {

enum class TaskKind { sort_digits, reverse_copy, mod_sum };

std::string task_name(TaskKind kind);
TaskKind task_from_name(const std::string& name);

/// A synthetic verifiable task. The ground-truth answer is a pure function
/// of the prompt; prompts are left-padded to a fixed width so completion
/// length is constant within a run.
struct TaskSpec {
    TaskKind kind = TaskKind::sort_digits;
    int prompt_min = 3;  // payload length range (digits or letters)
    int prompt_max = 3;
    int completion_len = 8;

    int payload_width() const { return kind == TaskKind::mod_sum ? 3 : prompt_max; }
    int prompt_width() const { return payload_width() + 1; }  // + '=' delimiter
    int total_len() const { return prompt_width() + completion_len; }

    void validate(const Vocab& vocab) const;
};

struct RewardSpec {
    double correct_weight = 2.0;
    double format_weight = 0.5;
};

struct Example {
    TokenSeq prompt;
    std::vector<int32_t> answer;
};

/// Deterministic per seed. The answer is the unique correct payload.
Example gen_example(const TaskSpec& task, const Vocab& vocab, uint64_t seed);

/// The ideal completion: answer enclosed in the delimiter pair, padded to
/// the task's completion length.
std::vector<int32_t> target_completion(const TaskSpec& task, const Vocab& vocab, const std::vector<int32_t>& answer);

struct RewardBreakdown {
    double total = 0.0;
    bool correct = false;
    bool well_formed = false;
};

/// Format weight iff the payload is enclosed in the delimiter pair exactly
/// once; correctness iff the first enclosed span equals the answer.
/// Malformed completions score zero, never error.
RewardBreakdown reward(const TokenSeq& completion, const std::vector<int32_t>& answer, const RewardSpec& spec,
                       const Vocab& vocab);

}  // namespace mgrpo
