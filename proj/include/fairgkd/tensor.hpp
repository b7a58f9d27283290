#pragma once

#include "fairgkd/common.hpp"

#include <functional>
#include <initializer_list>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace fairgkd {

class Tape;

namespace detail {
struct TensorImpl {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // row-major
    std::vector<double> grad;    // allocated iff grad_active
    bool requires_grad = false;  // leaf parameter flag
    bool grad_active = false;    // receives gradients during the current backward
    Tape* tape = nullptr;        // tape that recorded this tensor as an op output
    int node_id = -1;
};
} // namespace detail

// ----------------------------------------------------------------------------
// Dense 2-D tensor of 64-bit floats with optional participation in a
// reverse-mode tape. Copies share the underlying buffer (handle semantics),
// which is what lets an op's backward closure see gradients written later.
// ----------------------------------------------------------------------------
class Tensor {
public:
    Tensor() : impl_(std::make_shared<detail::TensorImpl>()) {}
    Tensor(int rows, int cols, double fill = 0.0);

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols, 0.0); }
    static Tensor ones(int rows, int cols) { return Tensor(rows, cols, 1.0); }
    static Tensor scalar(double v);
    static Tensor from_values(int rows, int cols, std::vector<double> values);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    /// Glorot-uniform weight init: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
    static Tensor glorot(int fan_in, int fan_out, Rng& rng);

    int rows() const { return impl_->rows; }
    int cols() const { return impl_->cols; }
    long size() const { return static_cast<long>(impl_->rows) * impl_->cols; }

    double operator()(int r, int c) const { return impl_->values[static_cast<size_t>(r) * impl_->cols + c]; }
    double& operator()(int r, int c) { return impl_->values[static_cast<size_t>(r) * impl_->cols + c]; }

    std::span<const double> data() const { return impl_->values; }
    std::span<double> data() { return impl_->values; }

    /// Value of a 1x1 tensor.
    double item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool on);

    bool grad_active() const { return impl_->grad_active; }
    std::span<const double> grad() const;
    std::span<double> grad_mut();
    void zero_grad();

    /// Deep copy of the values, detached from any tape, no grad.
    Tensor detached_copy() const;
    /// Overwrites values in place (shape must match).
    void assign_values(std::span<const double> v);

    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
    friend class Tape;
};

// ----------------------------------------------------------------------------
// Reverse-mode tape: an append-only list of recorded ops. Construction order
// is topological by definition; backward replays the closures in reverse,
// each one exactly once. A tape is made active with Tape::Scope (RAII); ops
// executed with no active tape are pure forward computations.
// ----------------------------------------------------------------------------
class Tape {
public:
    Tape() = default;
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Records one op. Marks the output grad-active and allocates its grad.
    void record(const Tensor& output, std::function<void()> backward);

    /// Seeds d(root)/d(root) = 1 and sweeps the tape in reverse from the
    /// root's node. Gradients accumulate; repeated calls without zeroing add.
    void backward_from(const Tensor& root);

    void clear();
    size_t size() const { return nodes_.size(); }

    /// RAII push of the active tape; a null tape disables recording, which
    /// makes a block pure-forward.
    class Scope {
    public:
        explicit Scope(Tape& t);
        explicit Scope(Tape* t);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

    static Tape* current();

private:
    struct Node {
        std::shared_ptr<detail::TensorImpl> output;
        std::function<void()> backward;
    };
    std::vector<Node> nodes_;
};

/// backward() on a 1x1 tape-recorded tensor. Errors on non-scalar or
/// detached roots.
void backward(const Tensor& root);

/// True when `tape` is active and any input is grad-active. Rejects inputs
/// still owned by a different live tape. Op implementations call this before
/// recording.
bool tape_should_record(Tape* tape, std::initializer_list<const Tensor*> inputs);

// ----------------------------------------------------------------------------
// Sparse matrix, compressed row storage. Used for adjacency; values are
// stored explicitly (normalization writes real weights).
// ----------------------------------------------------------------------------
struct CsrMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_ptr;   // size rows + 1
    std::vector<int> col_idx;   // size nnz, ascending within each row
    std::vector<double> values; // size nnz

    int nnz() const { return static_cast<int>(col_idx.size()); }

    static CsrMatrix identity(int n);
    /// Builds from (row, col, value) triples; duplicates are summed.
    static CsrMatrix from_triples(int rows, int cols,
                                  std::vector<std::tuple<int, int, double>> triples);

    CsrMatrix transposed() const;
    Tensor to_dense() const;
    bool is_symmetric() const;
};

using CsrPtr = std::shared_ptr<const CsrMatrix>;

// ----------------------------------------------------------------------------
// Differentiable ops. Each returns the forward value; when an input is
// grad-active and a tape is current, a backward rule is recorded.
// ----------------------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
/// Sparse-dense product s * d.
Tensor spmm(const CsrPtr& s, const Tensor& d);
/// Elementwise add; b may also be a 1 x cols row vector (bias broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
/// Scales every row to unit L2 norm; zero rows are rejected.
Tensor row_l2_normalize(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean_all(const Tensor& a);
/// Mean squared error over all entries, mean((a - b)^2).
Tensor mse_loss(const Tensor& a, const Tensor& b);

// ----------------------------------------------------------------------------
// Adam with coupled weight decay (decay * param is added to the gradient
// before the moment update).
// ----------------------------------------------------------------------------
struct AdamConfig {
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg);

    void step();
    void zero_grad();
    long step_count() const { return step_count_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig cfg_;
    long step_count_ = 0;
};

// ----------------------------------------------------------------------------
// Flat binary snapshot format: i64 rows, i64 cols, then rows*cols f64,
// little-endian. Used for checkpoints and embedding dumps.
// ----------------------------------------------------------------------------
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

/// FNV-1a over the raw bytes of all parameter values, for freeze checks.
uint64_t params_checksum(std::span<const Tensor> params);

} // namespace fairgkd
