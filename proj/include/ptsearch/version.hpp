#pragma once

namespace ptsearch {

inline constexpr const char* kVersion = "0.1.0";

#ifdef PTSEARCH_REAL32
inline constexpr const char* kPrecision = "f32";
#else
inline constexpr const char* kPrecision = "f64";
#endif

}  // namespace ptsearch
