#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ss/errors.hpp"

namespace ss {

struct ParamBlock {
    std::string name;
    std::vector<int> shape;
    bool prunable = true;
    int layer = 0;  // 0 = embedding stage, 1..L = encoder layers
    size_t size = 0;
    size_t offset_total = 0;     // flat offset over all encoder params
    size_t offset_prunable = 0;  // flat offset over prunable coordinates only
};

// Ordered catalog of the shared encoder's parameter blocks with a stable
// flat indexing. Embedding blocks are non-prunable; task heads live
// outside this universe entirely.
class ParamSpace {
public:
    void add_block(const std::string& name, std::vector<int> shape, bool prunable,
                   int layer);

    const std::vector<ParamBlock>& blocks() const { return blocks_; }
    const ParamBlock* find(const std::string& name) const;

    size_t prunable_count() const { return prunable_count_; }
    size_t total_count() const { return total_count_; }
    int num_layers() const { return num_layers_; }

    // 32-byte layout fingerprint; embedded in mask files to prevent
    // cross-model mask reuse.
    std::array<uint8_t, 32> layout_hash() const;

private:
    std::vector<ParamBlock> blocks_;
    size_t prunable_count_ = 0;
    size_t total_count_ = 0;
    int num_layers_ = 0;
};

// Binary mask over a ParamSpace's prunable coordinates, 1 = kept.
// Non-prunable coordinates are implicitly always kept.
struct MaskMatrix {
    std::string task_id;
    uint32_t iteration = 0;
    std::vector<uint8_t> bits;

    size_t kept() const;
};

// Remaining-parameter fraction (kept prunable + non-prunable) / |theta_E|.
// Note the convention: higher sparsity means a denser subnet.
double sparsity(const MaskMatrix& m, const ParamSpace& space);

// |intersection| / |union| over prunable coordinates.
double overlap_ratio(const std::vector<MaskMatrix>& ms);

std::vector<MaskMatrix> hard_sharing_masks(const ParamSpace& space, int num_tasks);

// Mask for task t keeps layers 1..task_layers[t] and drops everything
// above; embedding-stage (layer 0) blocks are always kept.
std::vector<MaskMatrix> hierarchical_masks(const ParamSpace& space,
                                           const std::vector<int>& task_layers);

void save_mask(const MaskMatrix& m, const ParamSpace& space, const std::string& path);
MaskMatrix load_mask(const std::string& path, const ParamSpace& space);

uint32_t crc32(const uint8_t* data, size_t len);

}  // namespace ss
