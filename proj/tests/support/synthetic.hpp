#pragma once

#include <cstdint>

#include "segmicro/dataio.hpp"

namespace segmicro::test {

// Deterministic 3-class blob images: bright nuclei inside mid-intensity
// cells on a dark background, with an illumination gradient and pixel noise.
// Class 1 = cell, class 2 = nucleus.
Dataset make_blob_dataset(int count, int size, std::uint64_t seed);

}  // namespace segmicro::test
