// Copyright 2026 The slucr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SLUCR_UTF8_H_
#define SLUCR_UTF8_H_

#include <string>
#include <string_view>

namespace slucr::utf8 {

// Decodes UTF-8 into Unicode scalar values. Throws DataError on invalid
// sequences, overlongs and surrogates.
std::u32string decode(std::string_view s);

std::string encode(std::u32string_view s);
std::string encode(char32_t c);

bool is_space(char32_t c);

// Trims Unicode-agnostic ASCII whitespace from both ends.
std::u32string_view trim(std::u32string_view s);

}  // namespace slucr::utf8

#endif  // SLUCR_UTF8_H_
