#pragma once

#include <string>

#include "segmicro/graph.hpp"

namespace segmicro {

// Checkpoint file: the magic line "SEGMICRO1", a little-endian u64 header
// length, a JSON header (model config, optimizer kind, epoch, val_loss and
// the tensor directory with shapes and byte offsets), then the payload of
// little-endian IEEE-754 f32 tensors in directory order.
inline constexpr char kCheckpointMagic[] = "SEGMICRO1";

struct CheckpointMeta {
  std::string optimizer_kind;
  int epoch = 0;
  double val_loss = 0.0;
};

struct LoadedCheckpoint {
  Graph<float> graph;
  CheckpointMeta meta;
};

// Atomic write (temp file + rename). Parameters round-trip bit-exactly.
void save_checkpoint(const Graph<float>& graph, const CheckpointMeta& meta,
                     const std::string& path);

// Rebuilds the graph from the embedded model config and validates every
// header shape against it before loading the payload.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace segmicro
