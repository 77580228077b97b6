#pragma once

// Checkpoint persistence. Binary layout, all integers little-endian:
//   magic "STORYGEN" (8 bytes)
//   version u32
//   config block: u64 byte length + serialized RunConfig text
//   vocab block: u64 token count, then per token u64 length + bytes + u64 freq
//   tensor directory: u64 tensor count, then per tensor
//     u64 name length + name bytes, u32 ndim, ndim x u32 dims, float32 data
//   checksum: FNV-1a 64 over everything before it, u64
// The version check runs before anything past the header is touched; the
// checksum check runs before any content is parsed.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "storygen/config.hpp"
#include "storygen/data.hpp"
#include "storygen/model.hpp"

namespace storygen {

inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'O', 'R', 'Y', 'G', 'E', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointErrorKind {
  kBadMagic,
  kVersionMismatch,
  kChecksumMismatch,
  kParseError,
  kIoError,
};

inline const char* checkpoint_error_kind_name(CheckpointErrorKind kind) {
  switch (kind) {
    case CheckpointErrorKind::kBadMagic: return "bad_magic";
    case CheckpointErrorKind::kVersionMismatch: return "version_mismatch";
    case CheckpointErrorKind::kChecksumMismatch: return "checksum_mismatch";
    case CheckpointErrorKind::kParseError: return "parse_error";
    case CheckpointErrorKind::kIoError: return "io_error";
  }
  return "?";
}

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(checkpoint_error_kind_name(kind)) + ": " + msg),
        kind_(kind) {}

  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

std::uint64_t fnv1a64(const unsigned char* data, std::size_t n);

void save_checkpoint(const std::string& path, const ModelParameters<float>& params,
                     const RunConfig& config, const Vocabulary& vocab);

struct LoadedCheckpoint {
  ModelParameters<float> params;
  RunConfig config;
  Vocabulary vocab;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace storygen
