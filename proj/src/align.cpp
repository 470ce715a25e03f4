#include "semshift/align.hpp"

#include <Eigen/SVD>

namespace semshift {

bool AlignmentMap::is_orthogonal(double tol) const {
  Mat gram = rotation.transpose() * rotation;
  gram -= Mat::Identity(rotation.rows(), rotation.cols());
  return gram.cwiseAbs().maxCoeff() < tol;
}

AlignmentMap procrustes_align(const EmbeddingModel& old_model, const EmbeddingModel& new_model) {
  if (old_model.dim() != new_model.dim())
    throw Error("procrustes_align: embedding dimensions differ");
  const Vocabulary& vo = old_model.vocab();
  const Vocabulary& vn = new_model.vocab();
  if (vo.size() != vn.size()) throw Error("procrustes_align: vocabulary size mismatch");
  for (int w = 0; w < vo.size(); ++w)
    if (vo.word(w) != vn.word(w))
      throw Error("procrustes_align: vocabularies differ at row " + std::to_string(w));

  Mat m = new_model.U.transpose() * old_model.U;
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  AlignmentMap map;
  map.rotation = svd.matrixU() * svd.matrixV().transpose();
  map.residual = (old_model.U * map.rotation.transpose() - new_model.U).norm();
  return map;
}

EmbeddingModel apply_alignment(const EmbeddingModel& model, const AlignmentMap& map) {
  if (map.rotation.rows() != model.dim() || map.rotation.cols() != model.dim())
    throw Error("apply_alignment: rotation shape does not match embedding dimension");
  EmbeddingModel out(model);
  out.U = model.U * map.rotation.transpose();
  out.V = model.V * map.rotation.transpose();
  out.invalidate_log_partitions();
  return out;
}

}  // namespace semshift
