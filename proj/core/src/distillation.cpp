#include "distill/distillation.hpp"

#include "distill/error.hpp"

namespace distill {

namespace {

void require_same_shape(Var s, const Mat& t, const char* what) {
  if (s.rows() != t.rows() || s.cols() != t.cols())
    throw InputError(std::string(what) + ": student and teacher shapes differ");
}

}  // namespace

Adapter::Adapter(nn::ParameterStore& store, const std::string& name, int dim) {
  nn::Rng unused(0);
  up_ = nn::Linear(store, name + ".up", dim, 2 * dim, unused, nn::Init::Zero);
  down_ = nn::Linear(store, name + ".down", 2 * dim, dim, unused, nn::Init::Zero);
  Mat& w1 = up_.weight().value;
  Mat& w2 = down_.weight().value;
  w1.leftCols(dim).setIdentity();
  w1.rightCols(dim) = -Mat::Identity(dim, dim);
  w2.topRows(dim).setIdentity();
  w2.bottomRows(dim) = -Mat::Identity(dim, dim);
}

Var Adapter::operator()(Tape& tape, Var x) const { return down_(tape, ad::relu(up_(tape, x))); }

Var loss_encoder_kd(Var student, const Mat& teacher) {
  require_same_shape(student, teacher, "encoder KD");
  if (student.rows() == 0) return student.tape()->constant(Mat::Zero(1, 1));
  return ad::mean(ad::row_norms(student - student.tape()->constant(teacher)));
}

Var loss_decoder_kd(Var student, const Mat& teacher, const Adapter& adapter) {
  require_same_shape(student, teacher, "decoder KD");
  Tape& tape = *student.tape();
  return ad::mean(ad::row_norms(adapter(tape, student) - tape.constant(teacher)));
}

Var loss_cls_kd(Var student_logits, const Mat& teacher_logits) {
  require_same_shape(student_logits, teacher_logits, "classification KD");
  Tape& tape = *student_logits.tape();
  const Eigen::Index n = teacher_logits.size();
  Mat t = Eigen::Map<const Mat>(teacher_logits.data(), 1, n);
  const double m = t.maxCoeff();
  Mat log_p = (t.array() - m).matrix();
  log_p.array() -= std::log((log_p.array().exp()).sum());
  const Mat p = log_p.array().exp().matrix();
  const double plogp = (p.array() * log_p.array()).sum();
  const Var log_q = ad::log_softmax_rows(ad::reshape(student_logits, 1, n));
  return ad::add_scalar(ad::scale(ad::sum(ad::cmul(tape.constant(p), log_q)), -1.0), plogp);
}

Var loss_reg_kd(Var student_trajs, const Mat& teacher_trajs) {
  require_same_shape(student_trajs, teacher_trajs, "regression KD");
  Tape& tape = *student_trajs.tape();
  return ad::scale(ad::sum(ad::abs(student_trajs - tape.constant(teacher_trajs))),
                   1.0 / static_cast<double>(student_trajs.rows()));
}

double loss_kd_total(const KDLossReport& r) {
  double total = 0.0;
  if (r.flags.encoder) total += r.l_en;
  if (r.flags.decoder) total += r.l_de;
  if (r.flags.cls) total += r.l_cls_kd;
  if (r.flags.reg) total += r.l_reg_kd;
  return total;
}

}  // namespace distill
