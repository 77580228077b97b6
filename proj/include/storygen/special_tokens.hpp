#pragma once

namespace storygen {

// Special ids occupy the first five vocabulary slots, in this order.
inline constexpr int kPadId = 0;
inline constexpr int kSosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kSentDelimId = 4;
inline constexpr int kNumSpecials = 5;

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kSosToken = "<sos>";
inline constexpr const char* kEosToken = "<eos>";
inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kSentDelimToken = "<sd>";

}  // namespace storygen
