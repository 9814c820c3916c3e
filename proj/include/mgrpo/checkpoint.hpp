#pragma once

#include <string>

#include "mgrpo/params.hpp"

namespace mgrpo {

// Container layout (all integers little-endian):
//   magic "MGRP", version u32, entry count u32, then per entry:
//   name length u16, UTF-8 name bytes, rank u8, dims u32 each,
//   payload little-endian f32.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ParamSet<float>& params);
ParamSet<float> load_checkpoint(const std::string& path);

}  // namespace mgrpo
