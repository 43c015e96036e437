#pragma once

#include "gvt/common.hpp"

#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <vector>

namespace gvt {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Dense row-major tensor of scalars S (float for training, double for the
// gradcheck path). Copying a Tensor copies the handle: data and grad are
// shared, so backward closures and optimizers see one storage. Data is
// treated as immutable once an op has produced it; only grad accumulates.
template <typename S>
class Tensor {
public:
    Tensor() : shape_{0}, state_(std::make_shared<State>()) {}

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)), state_(std::make_shared<State>()) {
        state_->data.assign(size_t(shape_numel(shape_)), S(0));
    }

    Tensor(Shape shape, std::vector<S> data)
        : shape_(std::move(shape)), state_(std::make_shared<State>()) {
        if (int64_t(data.size()) != shape_numel(shape_))
            throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape_));
        state_->data = std::move(data);
    }

    static Tensor scalar(S v) { return Tensor(Shape{1}, std::vector<S>{v}); }

    const Shape& shape() const { return shape_; }
    int ndim() const { return int(shape_.size()); }
    int dim(int i) const { return shape_[size_t(i)]; }
    int64_t numel() const { return int64_t(state_->data.size()); }
    bool is_scalar() const { return numel() == 1; }

    const std::vector<S>& data() const { return state_->data; }
    std::vector<S>& mutable_data() { return state_->data; }
    S item() const {
        if (!is_scalar()) throw ShapeError("item: tensor is not scalar, shape " + shape_str(shape_));
        return state_->data[0];
    }

    bool requires_grad() const { return state_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        state_->requires_grad = v;
        return *this;
    }

    std::vector<S>& grad() {
        if (state_->grad.size() != state_->data.size()) state_->grad.assign(state_->data.size(), S(0));
        return state_->grad;
    }
    const std::vector<S>& grad() const { return const_cast<Tensor*>(this)->grad(); }
    void zero_grad() { state_->grad.assign(state_->data.size(), S(0)); }

    // identity of the underlying storage, for parameter bookkeeping
    const void* id() const { return state_.get(); }

private:
    struct State {
        std::vector<S> data;
        std::vector<S> grad;
        bool requires_grad = false;
    };

    Shape shape_;
    std::shared_ptr<State> state_;
};

// Reverse-mode tape: an ordered list of recorded operations. Inputs of every
// recorded op were produced earlier, so running the closures strictly in
// reverse recording order propagates gradients correctly, accumulating
// additively across fan-out.
template <typename S>
class Tape {
public:
    void record(std::function<void()> backward_step) { steps_.push_back(std::move(backward_step)); }

    size_t size() const { return steps_.size(); }
    void clear() { steps_.clear(); }

    void backward(Tensor<S> loss) {
        if (!loss.is_scalar())
            throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
        loss.grad()[0] = S(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

    static Tape*& current() {
        thread_local Tape* cur = nullptr;
        return cur;
    }

    // RAII activation; ops record themselves only while a tape is active.
    class Scope {
    public:
        explicit Scope(Tape& t) : prev_(current()) { current() = &t; }
        ~Scope() { current() = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

private:
    std::vector<std::function<void()>> steps_;
};

template <typename S>
inline bool grad_enabled_for(std::initializer_list<const Tensor<S>*> inputs) {
    if (Tape<S>::current() == nullptr) return false;
    for (const Tensor<S>* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

} // namespace gvt
