#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spectra/tensor.hpp"

namespace spectra {

/// One persisted parameter. Values are f64 in memory; the file stores f32
/// (save narrows, load widens).
struct CheckpointRecord {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
};

struct MomentRecord {
    std::string name;
    std::vector<int> shape;
    std::vector<double> m;
    std::vector<double> v;
};

/// Ordered parameter snapshot plus training metadata. The optimizer trailer
/// (moments + step counter) is optional and lives behind its own magic so
/// merged checkpoints can omit it.
struct Checkpoint {
    std::vector<CheckpointRecord> records;
    std::uint64_t config_hash = 0;
    std::uint64_t step = 0;
    bool has_trailer = true;
    bool has_moments = false;
    std::uint64_t adam_step = 0;
    std::vector<MomentRecord> moments;

    const CheckpointRecord* find(const std::string& name) const;
};

/// Snapshots every entry (trainable and frozen alike) in store order.
Checkpoint checkpoint_from_store(const ParameterStore& store);

/// Loads values into an existing model's store. Any name or shape mismatch
/// in either direction is a hard error.
void load_into_store(const Checkpoint& ckpt, ParameterStore& store);

/// Rounds every store value through f32, mirroring what one save/load cycle
/// does to precision.
void quantize_store_to_f32(ParameterStore& store);

/// File layout: magic "DCKPT1", u32 record count, then per record u16 name
/// length, name bytes, u8 rank, u32 dims, f32 payload; an optional trailing
/// optimizer section starts with magic "OPTS1". All integers and floats are
/// little-endian.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a over the serialized parameter records (metadata excluded), as a
/// hex string for reports.
std::string checkpoint_content_hash(const Checkpoint& ckpt);

}  // namespace spectra
