#include "refinerl/metrics.hpp"

// Header-only for now; this translation unit anchors the target.
