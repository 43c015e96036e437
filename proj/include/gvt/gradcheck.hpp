#pragma once

// Finite-difference gradient checking. The harness is the project's gradient
// oracle: analytic gradients from the tape are compared against central
// differences coordinate by coordinate.

#include "gvt/ops.hpp"

#include <functional>

namespace gvt {

template <typename S>
using GradcheckFn = std::function<Tensor<S>(const std::vector<Tensor<S>>&)>;

// Returns max over all input coordinates of
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
// using central differences with the given step. The function must be pure:
// it is evaluated twice up front and a bitwise mismatch is an error.
template <typename S>
double gradcheck(const GradcheckFn<S>& f, std::vector<Tensor<S>>& inputs, double step) {
    auto eval = [&]() -> S {
        Tensor<S> y = f(inputs);
        if (!y.is_scalar())
            throw ShapeError("gradcheck: function must return a scalar, got " + shape_str(y.shape()));
        return y.item();
    };

    const S probe1 = eval();
    const S probe2 = eval();
    if (probe1 != probe2)
        throw NumericalError("gradcheck: function is not deterministic across probe calls");

    for (auto& in : inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }
    Tape<S> tape;
    Tensor<S> loss;
    {
        typename Tape<S>::Scope scope(tape);
        loss = f(inputs);
    }
    if (!loss.is_scalar())
        throw ShapeError("gradcheck: function must return a scalar");
    tape.backward(loss);

    double max_rel = 0.0;
    for (auto& in : inputs) {
        auto& data = in.mutable_data();
        const auto& grad = in.grad();
        for (size_t i = 0; i < data.size(); ++i) {
            const S saved = data[i];
            data[i] = S(double(saved) + step);
            const double fp = double(eval());
            data[i] = S(double(saved) - step);
            const double fm = double(eval());
            data[i] = saved;
            const double numeric = (fp - fm) / (2.0 * step);
            const double analytic = double(grad[i]);
            const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::fabs(analytic - numeric) / denom);
        }
    }
    return max_rel;
}

} // namespace gvt
