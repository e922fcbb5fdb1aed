#pragma once

#include <cstdint>
#include <vector>

namespace cnmt {

using TokenId = std::int32_t;
using IdSequence = std::vector<TokenId>;

}  // namespace cnmt
