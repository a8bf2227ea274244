#include "verify/gradcheck.hpp"

// Header-only templates; this translation unit pins the header's syntax into
// the library build so breakage surfaces without a test compile.
