#pragma once

// Product-quantization ANN search with register-table scan kernels:
// irregular subquantizer layouts, split-table lookups, transposed packed
// blocks, query-time distance quantization with saturated accumulation,
// and an IVF residual index.

#include "pqscan/codebook.hpp"
#include "pqscan/distance.hpp"
#include "pqscan/errors.hpp"
#include "pqscan/heap.hpp"
#include "pqscan/index.hpp"
#include "pqscan/io.hpp"
#include "pqscan/kmeans.hpp"
#include "pqscan/layout.hpp"
#include "pqscan/pqspec.hpp"
#include "pqscan/recall.hpp"
#include "pqscan/simd/caps.hpp"
#include "pqscan/simd/kernels.hpp"
#include "pqscan/simd/scan_scalar.hpp"
#include "pqscan/simd/scan_x86.hpp"
