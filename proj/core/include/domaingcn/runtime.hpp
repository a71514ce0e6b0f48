#pragma once

namespace domaingcn {

// Raises the allocator's mmap and trim thresholds so freed tape buffers stay
// in the process heap between training steps. Call once at program start.
void TuneAllocatorForTraining();

}  // namespace domaingcn
