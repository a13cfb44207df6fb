#pragma once

#include <cstdint>
#include <limits>

namespace cachesub {

// Node identifiers index into the TreeNetwork arrays. Node 0 is always the
// central office (CO) at the top of the distribution tree.
using NodeId = std::int32_t;
using AnoId = std::int32_t;  // access network operator
using CpId = std::int32_t;   // content provider

// Virtual content origin that sits above the CO. It is not a real node: it
// has no storage and is always able to serve any request. The CO's uplink
// (the transit link) leads to it.
inline constexpr NodeId kOrigin = -1;

// ANO marker for the CO, which is shared infrastructure and owned by no one.
inline constexpr AnoId kNoAno = -1;

// Canonical units used throughout:
//   traffic   Mb/s (busy-hour average per content or aggregated)
//   storage   GB
//   money     $/month
// Prices are $/(Mb/s)/month for links and $/GB/month for storage.

inline constexpr double kDefaultFileSizeGb = 0.001;  // 1 MB files

}  // namespace cachesub
