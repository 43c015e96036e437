#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gvt/gradcheck.hpp"
#include "gvt/nn.hpp"
#include "gvt/ops.hpp"

#include <cmath>

using namespace gvt;

namespace {

template <typename S>
Tensor<S> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<S> t(shape);
    for (auto& v : t.mutable_data()) v = S(rng.uniform(lo, hi));
    return t;
}

// gradcheck tolerance / step per precision
template <typename S> struct Tol;
template <> struct Tol<float> {
    static constexpr double step = 1e-2;
    static constexpr double max_rel = 1e-3;
};
template <> struct Tol<double> {
    static constexpr double step = 1e-5;
    static constexpr double max_rel = 1e-6;
};

} // namespace

TEST_CASE("matmul identity passthrough") {
    Tensor<double> a({2, 2}, {1, 2, 3, 4});
    Tensor<double> eye({2, 2}, {1, 0, 0, 1});
    Tensor<double> y = matmul(a, eye);
    for (int i = 0; i < 4; ++i) CHECK(y.data()[size_t(i)] == a.data()[size_t(i)]);
}

TEST_CASE("softmax of equal logits is uniform") {
    Tensor<double> x({1, 4}, {0, 0, 0, 0});
    Tensor<double> y = softmax(x);
    for (int i = 0; i < 4; ++i) CHECK(y.data()[size_t(i)] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("cross entropy of uniform logits is ln C") {
    Tensor<double> logits({3, 4}, std::vector<double>(12, 0.7));
    Tensor<double> loss = cross_entropy_with_logits(logits, {0, 3, 1});
    CHECK(loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("sum(x*y) gradient is exactly y") {
    Tensor<double> x({2, 3}, {1, -2, 3, 0.5, 4, -1});
    Tensor<double> y({2, 3}, {2, 0.25, -1, 7, 0.125, 5});
    x.set_requires_grad(true);
    Tape<double> tape;
    {
        Tape<double>::Scope scope(tape);
        Tensor<double> loss = sum_all(mul(x, y));
        tape.backward(loss);
    }
    for (size_t i = 0; i < 6; ++i) CHECK(x.grad()[i] == y.data()[i]);
}

TEST_CASE("cross entropy gradient equals softmax minus one-hot") {
    Rng rng(11);
    Tensor<double> logits = random_tensor<double>({5, 7}, rng, -2, 2);
    std::vector<int> targets = {3, 0, 6, 6, 1};
    logits.set_requires_grad(true);
    Tape<double> tape;
    {
        Tape<double>::Scope scope(tape);
        tape.backward(cross_entropy_with_logits(logits, targets));
    }
    Tensor<double> p = softmax(logits);
    for (int i = 0; i < 5; ++i) {
        for (int c = 0; c < 7; ++c) {
            const double expect =
                (p.data()[size_t(i * 7 + c)] - (targets[size_t(i)] == c ? 1.0 : 0.0)) / 5.0;
            CHECK(logits.grad()[size_t(i * 7 + c)] == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("gradient accumulates across fan-out exactly") {
    Tensor<double> x({3}, {1, 2, 3});
    Tensor<double> w({3}, {5, -4, 2});
    x.set_requires_grad(true);

    // loss = sum(x*w) alone
    Tape<double> t1;
    {
        Tape<double>::Scope scope(t1);
        t1.backward(sum_all(mul(x, w)));
    }
    const std::vector<double> g1 = x.grad();

    // loss = sum(x*w) + sum(x*x): gradients must add
    x.zero_grad();
    Tape<double> t2;
    {
        Tape<double>::Scope scope(t2);
        t2.backward(add(sum_all(mul(x, w)), sum_all(mul(x, x))));
    }
    for (size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == g1[i] + 2.0 * x.data()[i]);
}

TEST_CASE("backward requires a scalar loss") {
    Tensor<double> x({2}, {1, 2});
    x.set_requires_grad(true);
    Tape<double> tape;
    Tape<double>::Scope scope(tape);
    Tensor<double> y = mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("shape errors name the op") {
    Tensor<double> a({2, 3});
    Tensor<double> b({4, 2});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), ShapeError);
    CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("add"), ShapeError);
    CHECK_THROWS_WITH_AS(squared_error(a, b), doctest::Contains("squared_error"), ShapeError);
}

TEST_CASE("non-finite forward result raises a numerical error") {
    Tensor<float> big({1}, {3e38f});
    CHECK_THROWS_AS(add(big, big), NumericalError);
    Tensor<double> x({2}, {1, 2});
    CHECK_THROWS_AS(scale(x, std::numeric_limits<double>::infinity()), NumericalError);
}

TEST_CASE("init_parameter schemes") {
    Rng rng(42);
    Tensor<double> z = init_parameter<double>({3}, Init::kZeros, rng);
    for (double v : z.data()) CHECK(v == 0.0);

    Rng r1(7), r2(7);
    Tensor<double> n1 = init_parameter<double>({64}, Init::kNormal002, r1);
    Tensor<double> n2 = init_parameter<double>({64}, Init::kNormal002, r2);
    for (size_t i = 0; i < 64; ++i) CHECK(n1.data()[i] == n2.data()[i]);

    Tensor<double> u = init_parameter<double>({64, 64}, Init::kUniformFanIn, rng);
    const double bound = std::sqrt(6.0 / 64.0);
    for (double v : u.data()) {
        CHECK(v <= bound);
        CHECK(v >= -bound);
    }
}

TEST_CASE("detach blocks gradient flow") {
    Tensor<double> x({3}, {1, 2, 3});
    x.set_requires_grad(true);
    Tape<double> tape;
    {
        Tape<double>::Scope scope(tape);
        tape.backward(sum_all(mul(detach(x), x)));
    }
    // only the non-detached factor contributes: d/dx sum(c*x) = c = x values
    for (size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == x.data()[i]);
}

TEST_CASE("straight-through copies gradients to the source exactly") {
    Tensor<double> src({2, 2}, {0.1, 0.2, 0.3, 0.4});
    std::vector<double> hard = {1, 2, 3, 4};
    src.set_requires_grad(true);
    Tape<double> tape;
    {
        Tape<double>::Scope scope(tape);
        Tensor<double> out = straight_through(src, hard);
        for (size_t i = 0; i < 4; ++i) CHECK(out.data()[i] == hard[i]);
        Tensor<double> w({2, 2}, {5, 6, 7, 8});
        tape.backward(sum_all(mul(out, w)));
    }
    for (size_t i = 0; i < 4; ++i) CHECK(src.grad()[i] == double(i + 5));
}

TEST_CASE("gradcheck of sum of squares is tight") {
    std::vector<Tensor<double>> inputs = {Tensor<double>({3}, {1, 2, 3})};
    const double err = gradcheck<double>(
        [](const std::vector<Tensor<double>>& in) { return sum_all(mul(in[0], in[0])); }, inputs,
        1e-5);
    CHECK(err < 1e-8);
}

TEST_CASE("gradcheck rejects non-deterministic functions") {
    int calls = 0;
    std::vector<Tensor<double>> inputs = {Tensor<double>({2}, {1, 2})};
    GradcheckFn<double> f = [&calls](const std::vector<Tensor<double>>& in) {
        ++calls;
        return scale(sum_all(in[0]), 1.0 + 0.5 * calls);
    };
    CHECK_THROWS_AS(gradcheck<double>(f, inputs, 1e-5), NumericalError);
}

TEST_CASE_TEMPLATE("primitive gradchecks vs finite differences", S, float, double) {
    Rng rng(101);
    const double step = Tol<S>::step;
    const double tol = Tol<S>::max_rel;

    auto check = [&](const char* what, const GradcheckFn<S>& f, std::vector<Tensor<S>> inputs) {
        const double err = gradcheck<S>(f, inputs, step);
        INFO(std::string(what) << " rel err " << err);
        CHECK(err < tol);
    };

    check("matmul",
          [](const std::vector<Tensor<S>>& in) { return sum_all(matmul(in[0], in[1])); },
          {random_tensor<S>({3, 4}, rng), random_tensor<S>({4, 2}, rng)});
    check("add",
          [](const std::vector<Tensor<S>>& in) {
              return sum_all(mul(add(in[0], in[1]), in[0]));
          },
          {random_tensor<S>({2, 5}, rng), random_tensor<S>({2, 5}, rng)});
    check("add bias row",
          [](const std::vector<Tensor<S>>& in) {
              return sum_all(mul(add(in[0], in[1]), in[0]));
          },
          {random_tensor<S>({3, 4}, rng), random_tensor<S>({4}, rng)});
    check("mul+sub+scale",
          [](const std::vector<Tensor<S>>& in) {
              return sum_all(scale(mul(sub(in[0], in[1]), in[0]), 1.7));
          },
          {random_tensor<S>({4, 3}, rng), random_tensor<S>({4, 3}, rng)});
    check("concat+slice",
          [](const std::vector<Tensor<S>>& in) {
              Tensor<S> c = concat<S>({in[0], in[1]}, 1);
              return sum_all(mul(slice(c, 1, 1, 3), slice(c, 1, 2, 3)));
          },
          {random_tensor<S>({3, 2}, rng), random_tensor<S>({3, 3}, rng)});
    check("reshape+transpose",
          [](const std::vector<Tensor<S>>& in) {
              Tensor<S> r = reshape(in[0], {2, 6});
              return sum_all(matmul(r, transpose(r)));
          },
          {random_tensor<S>({4, 3}, rng)});
    check("softmax",
          [](const std::vector<Tensor<S>>& in) {
              return sum_all(mul(softmax(in[0]), in[1]));
          },
          {random_tensor<S>({3, 5}, rng), random_tensor<S>({3, 5}, rng)});
    check("layer_norm",
          [](const std::vector<Tensor<S>>& in) {
              return sum_all(mul(layer_norm(in[0], in[1], in[2]), in[0]));
          },
          {random_tensor<S>({4, 6}, rng), random_tensor<S>({6}, rng, 0.5, 1.5),
           random_tensor<S>({6}, rng)});
    check("gelu",
          [](const std::vector<Tensor<S>>& in) { return sum_all(gelu(in[0])); },
          // avoid the derivative zero-crossing near x = -0.75 where the
          // relative-error denominator vanishes under float noise
          {random_tensor<S>({3, 4}, rng, -0.4, 1.2)});
    check("relu",
          [](const std::vector<Tensor<S>>& in) { return sum_all(mul(relu(in[0]), in[0])); },
          // keep values away from the kink at 0 so central differences are valid
          {random_tensor<S>({8}, rng, 0.2, 1.0)});
    check("embedding_lookup scatter-add",
          [](const std::vector<Tensor<S>>& in) {
              // repeated id 1 exercises gradient accumulation into one row
              return sum_all(mul(embedding_lookup(in[0], {1, 0, 1, 2}), in[1]));
          },
          {random_tensor<S>({3, 4}, rng), random_tensor<S>({4, 4}, rng)});
    check("sum/mean reductions",
          [](const std::vector<Tensor<S>>& in) {
              Tensor<S> s = sum_axis(in[0], 0);
              Tensor<S> m = mean_axis(in[0], 1);
              return add(add(sum_all(mul(s, s)), mean_all(in[0])), sum_all(mul(m, m)));
          },
          {random_tensor<S>({3, 4}, rng)});
    check("masked_fill",
          [](const std::vector<Tensor<S>>& in) {
              const std::vector<uint8_t> keep = {1, 0, 1, 1, 0, 1};
              return sum_all(mul(masked_fill(in[0], keep, -3.0), in[1]));
          },
          {random_tensor<S>({2, 3}, rng), random_tensor<S>({2, 3}, rng)});
    check("cross_entropy_with_logits",
          [](const std::vector<Tensor<S>>& in) {
              return cross_entropy_with_logits(in[0], {2, 0, -1, 1});
          },
          {random_tensor<S>({4, 3}, rng)});
    check("squared_error",
          [](const std::vector<Tensor<S>>& in) { return squared_error(in[0], in[1]); },
          {random_tensor<S>({3, 3}, rng), random_tensor<S>({3, 3}, rng)});
}

TEST_CASE("layer_norm gradient vs central differences, double precision") {
    Rng rng(5);
    std::vector<Tensor<double>> inputs = {random_tensor<double>({3, 8}, rng),
                                          random_tensor<double>({8}, rng, 0.5, 1.5),
                                          random_tensor<double>({8}, rng)};
    const double err = gradcheck<double>(
        [](const std::vector<Tensor<double>>& in) {
            return sum_all(mul(layer_norm(in[0], in[1], in[2]), in[0]));
        },
        inputs, 1e-4);
    CHECK(err < 1e-3); // documented oracle: step 1e-4, rel error < 1e-3
    CHECK(err < 1e-6); // double precision is in fact much tighter
}

TEST_CASE("masked_fill blocks gradients at filled positions") {
    Tensor<double> x({4}, {1, 2, 3, 4});
    x.set_requires_grad(true);
    const std::vector<uint8_t> keep = {1, 0, 0, 1};
    Tape<double> tape;
    {
        Tape<double>::Scope scope(tape);
        tape.backward(sum_all(masked_fill(x, keep, 9.0)));
    }
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[2] == 0.0);
    CHECK(x.grad()[3] == 1.0);
}

TEST_CASE("cross entropy ignores -1 targets") {
    Tensor<double> logits({3, 2}, {5, 0, 0, 5, 1, 1});
    Tensor<double> l1 = cross_entropy_with_logits(logits, {0, -1, -1});
    Tensor<double> l2 = cross_entropy_with_logits(slice(logits, 0, 0, 1), {0});
    CHECK(l1.item() == doctest::Approx(l2.item()).epsilon(1e-12));
}

TEST_CASE("forward results are bit-identical across repeated runs") {
    auto run = [] {
        Rng rng(99);
        Tensor<float> a = random_tensor<float>({8, 8}, rng);
        Tensor<float> b = random_tensor<float>({8, 8}, rng);
        return softmax(matmul(gelu(a), b)).data();
    };
    const std::vector<float> r1 = run(), r2 = run();
    for (size_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("adamw takes a descent step and clips gradients") {
    Rng rng(3);
    Tensor<float> w({4}, {1, 1, 1, 1});
    w.set_requires_grad(true);
    ParamList<float> params = {{"w", w}};
    AdamConfig ac;
    ac.lr = 0.1;
    ac.grad_clip = 1.0;
    AdamW<float> opt(params, ac);

    auto loss_value = [&] {
        double s = 0;
        for (float v : w.data()) s += double(v) * double(v);
        return s;
    };
    const double before = loss_value();
    for (int it = 0; it < 5; ++it) {
        Tape<float> tape;
        Tape<float>::Scope scope(tape);
        opt.zero_grad();
        Tensor<float> loss = sum_all(mul(w, w));
        tape.backward(loss);
        const double norm = opt.grad_norm();
        opt.step();
        if (it == 0) CHECK(norm == doctest::Approx(4.0)); // grad 2w = (2,2,2,2)
    }
    CHECK(loss_value() < before);
}
