#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hg/dcdmmd/dcd_loss.hpp"
#include "hg/error.hpp"
#include "hg/model/model.hpp"
#include "hg/objective/losses.hpp"
#include "hg/trainer/adam.hpp"

namespace hg::train {

// One domain's mini-batch: network input (possibly erased), clean reconstruction target,
// class labels and per-sample occlusion flags.
template <typename S>
struct BranchBatch {
  Tensor<S> input;
  Tensor<S> target;
  std::vector<int> labels;
  std::vector<bool> occluded;
};

struct StepOptions {
  bool use_occlusion_classifier = true;
  bool use_global = true;
  dcd::BandwidthMemo* memo = nullptr;
};

inline void check_finite(const objective::LossBreakdown& b) {
  b.for_each_field([](const char* name, const double& v) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite loss component: ") + name);
  });
}

// Teacher-only objective: the holistic joint loss (part CE + lambda * reconstruction).
// Accumulates gradients into `m` (zero them first).
template <typename S>
objective::LossBreakdown pretrain_gradients(model::Model<S>& m, const BranchBatch<S>& teacher,
                                            const objective::LossWeights& w) {
  typename model::Encoder<S>::Cache ec;
  typename model::Decoder<S>::Cache dc;
  const Tensor<S> fmap = m.encode(teacher.input, model::Mode::train, ec);
  const Tensor<S> recon = m.decode(fmap, model::Mode::train, dc);
  const Tensor<S> parts = model::part_pool(fmap, m.config().parts);
  const Tensor<S> logits = m.teacher_classifier().forward(parts);
  auto ce = objective::parts_ce_loss(logits, teacher.labels);
  auto rl = objective::recon_loss(teacher.target, recon);

  objective::LossBreakdown b;
  b.ce_teacher = ce.value;
  b.recon_teacher = rl.value;
  b.joint_teacher = objective::joint_loss(ce.value, rl.value, w);
  b.total = b.joint_teacher;
  check_finite(b);

  Tensor<S> dmap(fmap.shape());
  model::part_pool_backward(m.teacher_classifier().backward(ce.grad, parts), dmap);
  if (w.lambda_recon != 0.0) {
    for (auto& g : rl.grad.vec()) g *= static_cast<S>(w.lambda_recon);
    dmap += m.decoder().backward(rl.grad, dc);
  }
  m.encoder().backward(dmap, ec);
  return b;
}

// Full student-teacher objective
//   alpha (joint_N + joint_O) + (1 - alpha) L_D + occ_weight * BCE
// with gradients accumulated into `m`. The teacher part features enter L_D as constants;
// `teacher_parts_override`, when given, replaces them inside L_D only.
template <typename S>
objective::LossBreakdown hg_gradients(model::Model<S>& m, const BranchBatch<S>& teacher, const BranchBatch<S>& student,
                                      const objective::LossWeights& w, const dcd::KernelConfig& kernel,
                                      const StepOptions& opt = {}, const Tensor<S>* teacher_parts_override = nullptr,
                                      Tensor<S>* teacher_parts_out = nullptr) {
  const int p = m.config().parts;
  const double a = w.alpha;
  const double d_coef = 1.0 - w.alpha;
  const bool use_occ = opt.use_occlusion_classifier && w.occ_cls_weight != 0.0;

  // Teacher branch.
  typename model::Encoder<S>::Cache ecN, ecO;
  typename model::Decoder<S>::Cache dcN, dcO;
  typename model::AttentionEmbedding<S>::Cache ac;
  const Tensor<S> mapN = m.encode(teacher.input, model::Mode::train, ecN);
  const Tensor<S> reconN = m.decode(mapN, model::Mode::train, dcN);
  const Tensor<S> partsN = model::part_pool(mapN, p);
  const Tensor<S> logitsN = m.teacher_classifier().forward(partsN);
  auto ceN = objective::parts_ce_loss(logitsN, teacher.labels);
  auto rlN = objective::recon_loss(teacher.target, reconN);
  if (teacher_parts_out) *teacher_parts_out = partsN;

  // Student branch.
  const Tensor<S> mapO = m.encode(student.input, model::Mode::train, ecO);
  const Tensor<S> reconO = m.decode(mapO, model::Mode::train, dcO);
  const Tensor<S> partsO = model::part_pool(mapO, p);
  const Tensor<S> att = m.student_attention(partsO, model::Mode::train, ac);
  const Tensor<S> attended = model::apply_attention(partsO, att);
  const Tensor<S> logitsO = m.student_classifier().forward(attended);
  auto ceO = objective::parts_ce_loss(logitsO, student.labels);
  auto rlO = objective::recon_loss(student.target, reconO);

  // Distribution matching.
  dcd::DcdResult<S> dr;
  if (d_coef != 0.0) {
    const Tensor<S>& tparts = teacher_parts_override ? *teacher_parts_override : partsN;
    dr = dcd::dcd_loss(tparts, teacher.labels, attended, student.labels, partsO, kernel, w,
                       dcd::DcdOptions{opt.use_global}, opt.memo, true);
  }

  // Occlusion classifier over both branches' global features.
  Tensor<S> gN, gO, occ_in;
  objective::LossWithGrad<S> bce;
  if (use_occ) {
    gN = model::global_pool(mapN);
    gO = model::global_pool(mapO);
    const int BN = gN.dim(0), BO = gO.dim(0), C = gN.dim(1);
    occ_in = Tensor<S>({BN + BO, C});
    std::copy(gN.vec().begin(), gN.vec().end(), occ_in.vec().begin());
    std::copy(gO.vec().begin(), gO.vec().end(), occ_in.vec().begin() + gN.size());
    std::vector<bool> flags = teacher.occluded;
    flags.insert(flags.end(), student.occluded.begin(), student.occluded.end());
    bce = objective::occlusion_bce(m.occlusion_classifier().forward(occ_in), flags);
  }

  objective::LossBreakdown b;
  b.ce_teacher = ceN.value;
  b.ce_student = ceO.value;
  b.recon_teacher = rlN.value;
  b.recon_student = rlO.value;
  b.joint_teacher = objective::joint_loss(ceN.value, rlN.value, w);
  b.joint_student = objective::joint_loss(ceO.value, rlO.value, w);
  b.l_d_wc = dr.l_d_wc;
  b.l_d_bc = dr.l_d_bc;
  b.l_global = dr.l_global;
  b.l_d = dr.l_d;
  b.occ_bce = use_occ ? bce.value : 0.0;
  b.total = objective::total_loss(b.joint_teacher, b.joint_student, b.l_d, b.occ_bce, w);
  check_finite(b);

  const auto scale = [](Tensor<S>& t, double s) {
    for (auto& v : t.vec()) v *= static_cast<S>(s);
  };

  // Backward, teacher branch.
  Tensor<S> dmapN(mapN.shape());
  if (a != 0.0) {
    scale(ceN.grad, a);
    model::part_pool_backward(m.teacher_classifier().backward(ceN.grad, partsN), dmapN);
    if (w.lambda_recon != 0.0) {
      scale(rlN.grad, a * w.lambda_recon);
      dmapN += m.decoder().backward(rlN.grad, dcN);
    }
  }

  // Backward, student branch.
  Tensor<S> dattended(attended.shape());
  Tensor<S> dpartsO(partsO.shape());
  if (a != 0.0) {
    scale(ceO.grad, a);
    dattended = m.student_classifier().backward(ceO.grad, attended);
  }
  if (d_coef != 0.0) {
    scale(dr.grad_attended, d_coef);
    scale(dr.grad_raw, d_coef);
    dattended += dr.grad_attended;
    dpartsO += dr.grad_raw;
  }
  Tensor<S> datt(att.shape());
  for (std::size_t i = 0; i < dattended.size(); ++i) {
    dpartsO[i] += dattended[i] * att[i];
    datt[i] = dattended[i] * partsO[i];
  }
  if (!m.attention_frozen()) dpartsO += m.attention().backward(datt, ac);
  Tensor<S> dmapO(mapO.shape());
  model::part_pool_backward(dpartsO, dmapO);
  if (a != 0.0 && w.lambda_recon != 0.0) {
    scale(rlO.grad, a * w.lambda_recon);
    dmapO += m.decoder().backward(rlO.grad, dcO);
  }

  if (use_occ) {
    scale(bce.grad, w.occ_cls_weight);
    const Tensor<S> dglob = m.occlusion_classifier().backward(bce.grad, occ_in);
    const int BN = gN.dim(0), C = gN.dim(1);
    Tensor<S> dgN({BN, C}), dgO({gO.dim(0), C});
    std::copy(dglob.vec().begin(), dglob.vec().begin() + gN.size(), dgN.vec().begin());
    std::copy(dglob.vec().begin() + gN.size(), dglob.vec().end(), dgO.vec().begin());
    model::global_pool_backward(dgN, dmapN);
    model::global_pool_backward(dgO, dmapO);
  }

  m.encoder().backward(dmapN, ecN);
  m.encoder().backward(dmapO, ecO);
  return b;
}

// Groups updated during joint training.
template <typename S>
std::function<bool(model::Group)> joint_trainable(const model::Model<S>& m, bool occlusion_classifier_used) {
  const bool frozen = m.attention_frozen();
  return [frozen, occlusion_classifier_used](model::Group g) {
    if (g == model::Group::attention) return !frozen;
    if (g == model::Group::occlusion_classifier) return occlusion_classifier_used;
    return true;
  };
}

inline bool pretrain_trainable(model::Group g) {
  return g == model::Group::encoder || g == model::Group::decoder || g == model::Group::teacher_classifier;
}

// One optimisation step of the joint objective.
template <typename S>
objective::LossBreakdown train_step(model::Model<S>& m, Adam<S>& opt, const BranchBatch<S>& teacher,
                                    const BranchBatch<S>& student, const objective::LossWeights& w,
                                    const dcd::KernelConfig& kernel, const StepOptions& so = {}) {
  m.zero_grad();
  const auto b = hg_gradients(m, teacher, student, w, kernel, so);
  opt.step(m, joint_trainable(m, so.use_occlusion_classifier && w.occ_cls_weight != 0.0));
  return b;
}

template <typename S>
objective::LossBreakdown pretrain_step(model::Model<S>& m, Adam<S>& opt, const BranchBatch<S>& teacher,
                                       const objective::LossWeights& w) {
  m.zero_grad();
  const auto b = pretrain_gradients(m, teacher, w);
  opt.step(m, pretrain_trainable);
  return b;
}

}  // namespace hg::train
