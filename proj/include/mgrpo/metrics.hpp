#pragma once

#include <fstream>
#include <string>

#include "mgrpo/grpo.hpp"

namespace mgrpo {

/// Append-only JSONL metrics stream, one record per step, flushed per
/// write.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path);

    void write(const StepMetrics& m);
    const std::string& path() const { return path_; }

    static std::string to_json(const StepMetrics& m);

private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace mgrpo
