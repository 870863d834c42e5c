#pragma once

#include "distill/config.hpp"
#include "distill/encoders.hpp"

namespace distill {

struct KDLossReport {
  double l_en = 0.0;
  double l_de = 0.0;
  double l_cls_kd = 0.0;
  double l_reg_kd = 0.0;
  double l_kd = 0.0;
  KdFlags flags;
};

// psi = Linear(D, 2D) -> ReLU -> Linear(2D, D), initialized to the identity.
class Adapter {
 public:
  Adapter() = default;
  Adapter(nn::ParameterStore& store, const std::string& name, int dim);
  Var operator()(Tape& tape, Var x) const;

 private:
  nn::Linear up_;
  nn::Linear down_;
};

// Teacher-side arguments are plain matrices, so no gradient can reach the teacher.

// Mean over tokens of the L2 distance.
Var loss_encoder_kd(Var student, const Mat& teacher);
Var loss_decoder_kd(Var student, const Mat& teacher, const Adapter& adapter);
// KL(softmax(teacher) || softmax(student)) over modes.
Var loss_cls_kd(Var student_logits, const Mat& teacher_logits);
// Mean over modes of the per-mode L1 distance between displacement rows.
Var loss_reg_kd(Var student_trajs, const Mat& teacher_trajs);

// Sum of the enabled terms; l_kd is ignored.
double loss_kd_total(const KDLossReport& report);

}  // namespace distill
