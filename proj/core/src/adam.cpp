#include "spnet/adam.hpp"

#include <cmath>

#include "spnet/error.hpp"

namespace spnet {

template <typename T>
void adam_step(BasicTensor<T>& param, const BasicTensor<T>& grad, BasicAdamState<T>& state,
               const AdamHyperParams& hp) {
  if (param.shape() != grad.shape()) {
    throw InvalidShapeError("adam_step: gradient shape " + shape_to_string(grad.shape()) +
                            " does not match parameter " + shape_to_string(param.shape()));
  }
  if (state.first_moment.empty()) state = BasicAdamState<T>::for_shape(param.shape());
  if (state.first_moment.shape() != param.shape() || state.second_moment.shape() != param.shape()) {
    throw InvalidShapeError("adam_step: optimizer state does not match parameter shape");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(hp.beta1);
  const T b2 = static_cast<T>(hp.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(hp.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(hp.beta2, t));
  const T lr = static_cast<T>(hp.learning_rate);
  const T eps = static_cast<T>(hp.epsilon);

  T* p = param.ptr();
  T* m = state.first_moment.ptr();
  T* v = state.second_moment.ptr();
  const T* g = grad.ptr();
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
    const T m_hat = m[i] / correction1;
    const T v_hat = v[i] / correction2;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template void adam_step(BasicTensor<float>&, const BasicTensor<float>&, BasicAdamState<float>&,
                        const AdamHyperParams&);
template void adam_step(BasicTensor<double>&, const BasicTensor<double>&, BasicAdamState<double>&,
                        const AdamHyperParams&);

}  // namespace spnet
