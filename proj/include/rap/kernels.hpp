#pragma once

#include <vector>

#include "rap/encoder.hpp"

namespace rap {
namespace kernels {

// Data-parallel batch kernels. Each has a serial reference implementation;
// the OpenMP variants write per-element results only, so output is identical
// for any thread count.

std::vector<Vec> embed_batch_serial(const EncoderHead& head, const std::vector<Vec>& xs);
std::vector<Vec> embed_batch(const EncoderHead& head, const std::vector<Vec>& xs);

/// Nearest-centroid assignment by squared Euclidean distance, ties to the
/// lowest centroid index. Fills labels and per-point squared distances.
void assign_points_serial(const std::vector<Vec>& points, const std::vector<Vec>& centroids,
                          std::vector<int>& labels, std::vector<double>& sq_dists);
void assign_points(const std::vector<Vec>& points, const std::vector<Vec>& centroids,
                   std::vector<int>& labels, std::vector<double>& sq_dists);

}  // namespace kernels
}  // namespace rap
