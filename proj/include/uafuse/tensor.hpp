#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Forward results are scanned for NaN/Inf in debug builds only.
#if !defined(NDEBUG) && !defined(UAFUSE_CHECK_FINITE)
#define UAFUSE_CHECK_FINITE 1
#endif

namespace uafuse {

enum class Precision { Single, Double };

template <typename T>
class Tape;

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

[[noreturn]] inline void dim_error(const std::string& msg) {
    throw std::invalid_argument("dimension error: " + msg);
}

/// Dense row-major N-d array of reals. Copies share the underlying buffer;
/// operations never mutate their inputs, so sharing is safe. A tensor is
/// tracked for gradients exactly when it holds a node handle into a tape.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::shared_ptr<std::vector<T>> data;
    Tape<T>* tape = nullptr;
    int node = -1;

    Tensor() : data(std::make_shared<std::vector<T>>()) {}

    explicit Tensor(std::vector<int> shp, T fill = T(0)) : shape(std::move(shp)) {
        data = std::make_shared<std::vector<T>>(static_cast<std::size_t>(numel_of(shape)), fill);
    }

    Tensor(std::vector<int> shp, std::vector<T> values) : shape(std::move(shp)) {
        if (static_cast<std::int64_t>(values.size()) != numel_of(shape))
            dim_error("value count " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
        data = std::make_shared<std::vector<T>>(std::move(values));
    }

    static std::int64_t numel_of(const std::vector<int>& shp) {
        std::int64_t n = 1;
        for (int d : shp) {
            if (d <= 0) dim_error("nonpositive extent in shape " + shape_str(shp));
            n *= d;
        }
        return n;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data->size()); }
    bool defined() const { return !shape.empty(); }
    int dim(std::size_t i) const { return shape.at(i); }
    T* ptr() { return data->data(); }
    const T* ptr() const { return data->data(); }
    T& operator[](std::int64_t i) { return (*data)[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return (*data)[static_cast<std::size_t>(i)]; }

    bool requires_grad() const { return node >= 0 && tape != nullptr; }
    static constexpr Precision precision() {
        return sizeof(T) == sizeof(double) ? Precision::Double : Precision::Single;
    }

    /// Same values, no tape binding. Shares the buffer.
    Tensor detached() const {
        Tensor t;
        t.shape = shape;
        t.data = data;
        return t;
    }

    /// Deep copy of the buffer.
    Tensor clone() const {
        Tensor t;
        t.shape = shape;
        t.data = std::make_shared<std::vector<T>>(*data);
        return t;
    }
};

/// Append-only record of forward operations. Backward visits nodes exactly
/// once in reverse append order. One tape serves one forward pass; calling
/// backward twice without a fresh forward is an error.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const std::vector<T>&)>;

    /// Register a tensor as a gradient-accumulating input (parameter or data).
    Tensor<T> leaf(const Tensor<T>& t) {
        Tensor<T> tracked = t;
        tracked.tape = this;
        tracked.node = add_node(nullptr, t.numel());
        return tracked;
    }

    int record(BackwardFn backward, std::int64_t out_numel) {
        return add_node(std::move(backward), out_numel);
    }

    void accumulate(int node, const T* g, std::int64_t n) {
        auto& buf = grads_[static_cast<std::size_t>(node)];
        if (buf.empty()) buf.assign(static_cast<std::size_t>(n), T(0));
        T* dst = buf.data();
        for (std::int64_t i = 0; i < n; ++i) dst[i] += g[i];
    }

    void backward(const Tensor<T>& loss) {
        if (loss.tape != this || loss.node < 0)
            throw std::invalid_argument("backward: loss is not tracked on this tape");
        if (loss.numel() != 1)
            throw std::invalid_argument("backward: loss must be a scalar, got shape " + shape_str(loss.shape));
        if (backward_done_)
            throw std::logic_error("backward: tape already consumed, re-run forward first");
        backward_done_ = true;

        grads_[static_cast<std::size_t>(loss.node)].assign(1, T(1));
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            auto& g = grads_[static_cast<std::size_t>(i)];
            if (g.empty()) continue;
            if (nodes_[static_cast<std::size_t>(i)].backward) {
                nodes_[static_cast<std::size_t>(i)].backward(*this, g);
                g.clear();
                g.shrink_to_fit();
            }
            // leaf gradients stay available after backward
        }
    }

    bool has_grad(const Tensor<T>& t) const {
        return t.node >= 0 && !grads_[static_cast<std::size_t>(t.node)].empty();
    }

    /// Gradient of the loss w.r.t. a tracked tensor. Zero if the tensor
    /// never reached the loss.
    std::vector<T> grad(const Tensor<T>& t) const {
        if (t.tape != this || t.node < 0)
            throw std::invalid_argument("grad: tensor is not tracked on this tape");
        const auto& g = grads_[static_cast<std::size_t>(t.node)];
        if (g.empty()) return std::vector<T>(static_cast<std::size_t>(t.numel()), T(0));
        return g;
    }

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return backward_done_; }

private:
    struct Node {
        BackwardFn backward; // null for leaves
    };

    int add_node(BackwardFn fn, std::int64_t numel) {
        (void)numel;
        nodes_.push_back(Node{std::move(fn)});
        grads_.emplace_back();
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
    std::vector<std::vector<T>> grads_;
    bool backward_done_ = false;
};

template <typename T>
inline Tape<T>* common_tape(std::initializer_list<const Tensor<T>*> ts) {
    Tape<T>* tape = nullptr;
    for (const Tensor<T>* t : ts) {
        if (!t->requires_grad()) continue;
        if (tape == nullptr) tape = t->tape;
        else if (tape != t->tape)
            throw std::invalid_argument("operands are tracked on different tapes");
    }
    return tape;
}

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* op) {
#ifdef UAFUSE_CHECK_FINITE
    for (const T& v : *t.data) {
        if (!std::isfinite(static_cast<double>(v)))
            throw std::runtime_error(std::string("non-finite value produced by ") + op);
    }
#else
    (void)t;
    (void)op;
#endif
}

} // namespace uafuse
