#pragma once

namespace armorcage::detail {

// True when `cap` (a CAP_* number) is in the calling thread's effective set.
bool has_capability(int cap);

}  // namespace armorcage::detail
