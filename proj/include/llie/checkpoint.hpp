#pragma once

#include <filesystem>

#include "llie/teacher_student.hpp"

namespace llie {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: magic, version, config text, architecture, counters,
/// named tensors (student, teacher, optimizer moments), checksum.
template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const TrainState<Scalar>& state);

/// Restores everything save_checkpoint wrote. Throws CheckpointCorrupt on a
/// bad magic, version, checksum or truncated file.
template <typename Scalar>
TrainState<Scalar> load_checkpoint(const std::filesystem::path& path);

/// Like load_checkpoint, but throws ConfigMismatch unless the stored
/// architecture equals `expected`.
template <typename Scalar>
TrainState<Scalar> load_checkpoint(const std::filesystem::path& path, const BackboneConfig& expected);

}  // namespace llie
