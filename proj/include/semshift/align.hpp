#pragma once

#include "semshift/common.hpp"
#include "semshift/embed.hpp"

namespace semshift {

// Orthogonal map from the old slice's embedding space into the new one.
struct AlignmentMap {
  Mat rotation;     // dim x dim orthogonal matrix Q
  double residual;  // ||U_old Q^T - U_new||_F after alignment

  bool is_orthogonal(double tol = 1e-8) const;
};

// Solves min_Q ||Q u_old(w) - u_new(w)|| over orthogonal Q, summed over the
// shared vocabulary (both models must share one vocabulary object contents).
AlignmentMap procrustes_align(const EmbeddingModel& old_model, const EmbeddingModel& new_model);

// Returns a copy of `model` with both U and V rotated by `map.rotation`.
EmbeddingModel apply_alignment(const EmbeddingModel& model, const AlignmentMap& map);

}  // namespace semshift
