#pragma once

#include <cmath>
#include <vector>

#include "mgccn/tape.hpp"

namespace mgccn {

struct AdamOptions {
  double lr = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over a fixed list of parameters. The list order must not change
// between steps since moments are kept by position.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options) : params_(std::move(params)), opt_(options) {
    for (auto* p : params_) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grads() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (Index k = 0; k < params_.size(); ++k) {
      const Matrix& g = params_[k]->grad;
      m_[k] = opt_.beta1 * m_[k] + (1.0 - opt_.beta1) * g;
      v_[k] = opt_.beta2 * v_[k] + (1.0 - opt_.beta2) * g.cwiseProduct(g);
      params_[k]->value.array() -=
          opt_.lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + opt_.epsilon);
    }
  }

  Index steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions opt_;
  std::vector<Matrix> m_, v_;
  Index t_ = 0;
};

}  // namespace mgccn
