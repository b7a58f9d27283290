#include "fairgkd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>

namespace fairgkd {

using detail::TensorImpl;

namespace {

thread_local Tape* g_current_tape = nullptr;

void ensure_grad_buffer(TensorImpl& impl) {
    if (impl.grad.size() != impl.values.size()) impl.grad.assign(impl.values.size(), 0.0);
}

std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << t.rows() << "x" << t.cols();
    return os.str();
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

} // namespace

bool tape_should_record(Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (tape == nullptr) return false;
    bool active = false;
    for (const Tensor* t : inputs) {
        const auto& impl = *t->impl();
        if (impl.tape != nullptr && impl.tape != tape)
            throw ContractError("op input already belongs to a different tape");
        active = active || impl.grad_active;
    }
    return active;
}

// ------------------------------- Tensor --------------------------------------

Tensor::Tensor(int rows, int cols, double fill) : impl_(std::make_shared<TensorImpl>()) {
    if (rows < 0 || cols < 0) throw ContractError("Tensor: negative dimension");
    impl_->rows = rows;
    impl_->cols = cols;
    impl_->values.assign(static_cast<size_t>(rows) * cols, fill);
}

Tensor Tensor::scalar(double v) {
    Tensor t(1, 1);
    t(0, 0) = v;
    return t;
}

Tensor Tensor::from_values(int rows, int cols, std::vector<double> values) {
    if (values.size() != static_cast<size_t>(rows) * cols)
        throw ContractError("Tensor::from_values: value count does not match shape");
    Tensor t;
    t.impl_->rows = rows;
    t.impl_->cols = cols;
    t.impl_->values = std::move(values);
    return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Tensor t(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) throw ContractError("Tensor::from_rows: ragged rows");
        int j = 0;
        for (double v : row) t(i, j++) = v;
        ++i;
    }
    return t;
}

Tensor Tensor::glorot(int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t(fan_in, fan_out);
    for (double& v : t.impl_->values) v = rng.uniform(-limit, limit);
    return t;
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item(): tensor is not 1x1 (" + shape_str(*this) + ")");
    return impl_->values[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
    impl_->requires_grad = on;
    impl_->grad_active = on;
    if (on)
        ensure_grad_buffer(*impl_);
    else
        impl_->grad.clear();
    return *this;
}

std::span<const double> Tensor::grad() const {
    if (impl_->grad.size() != impl_->values.size())
        throw ContractError("grad(): tensor has no gradient buffer");
    return impl_->grad;
}

std::span<double> Tensor::grad_mut() {
    ensure_grad_buffer(*impl_);
    return impl_->grad;
}

void Tensor::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detached_copy() const {
    Tensor t;
    t.impl_->rows = impl_->rows;
    t.impl_->cols = impl_->cols;
    t.impl_->values = impl_->values;
    return t;
}

void Tensor::assign_values(std::span<const double> v) {
    if (v.size() != impl_->values.size()) throw ContractError("assign_values: size mismatch");
    std::copy(v.begin(), v.end(), impl_->values.begin());
}

// -------------------------------- Tape ---------------------------------------

Tape::~Tape() {
    clear();
}

void Tape::record(const Tensor& output, std::function<void()> backward_fn) {
    auto& impl = *output.impl();
    if (impl.tape != nullptr && impl.tape != this)
        throw ContractError("Tape::record: tensor already belongs to another tape");
    impl.tape = this;
    impl.node_id = static_cast<int>(nodes_.size());
    impl.grad_active = true;
    ensure_grad_buffer(impl);
    nodes_.push_back(Node{output.impl(), std::move(backward_fn)});
}

void Tape::backward_from(const Tensor& root) {
    auto& impl = *root.impl();
    if (impl.rows != 1 || impl.cols != 1)
        throw ContractError("backward: root must be a 1x1 scalar");
    if (impl.tape != this || impl.node_id < 0)
        throw ContractError("backward: root is detached from this tape");
    // Intermediate (op-output) gradients are transient per sweep; only leaf
    // gradients accumulate across calls.
    for (int i = 0; i <= impl.node_id; ++i) {
        auto& out = *nodes_[static_cast<size_t>(i)].output;
        std::fill(out.grad.begin(), out.grad.end(), 0.0);
    }
    impl.grad[0] = 1.0;
    for (int i = impl.node_id; i >= 0; --i) nodes_[static_cast<size_t>(i)].backward();
}

void Tape::clear() {
    // Detach outputs so their impls outlive the tape safely.
    for (auto& node : nodes_) {
        node.output->tape = nullptr;
        node.output->node_id = -1;
        if (!node.output->requires_grad) node.output->grad_active = false;
    }
    nodes_.clear();
}

Tape::Scope::Scope(Tape& t) : prev_(g_current_tape) {
    g_current_tape = &t;
}

Tape::Scope::Scope(Tape* t) : prev_(g_current_tape) {
    g_current_tape = t;
}

Tape::Scope::~Scope() {
    g_current_tape = prev_;
}

Tape* Tape::current() {
    return g_current_tape;
}

void backward(const Tensor& root) {
    Tape* tape = root.impl()->tape;
    if (tape == nullptr) throw ContractError("backward: root is not recorded on any tape");
    tape->backward_from(root);
}

// ------------------------------ CsrMatrix ------------------------------------

CsrMatrix CsrMatrix::identity(int n) {
    CsrMatrix m;
    m.rows = m.cols = n;
    m.row_ptr.resize(n + 1);
    m.col_idx.resize(n);
    m.values.assign(n, 1.0);
    for (int i = 0; i <= n; ++i) m.row_ptr[i] = i;
    for (int i = 0; i < n; ++i) m.col_idx[i] = i;
    return m;
}

CsrMatrix CsrMatrix::from_triples(int rows, int cols,
                                  std::vector<std::tuple<int, int, double>> triples) {
    for (const auto& [r, c, v] : triples) {
        (void)v;
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw DataError("CsrMatrix::from_triples: index out of range");
    }
    std::sort(triples.begin(), triples.end(),
              [](const auto& a, const auto& b) {
                  return std::tie(std::get<0>(a), std::get<1>(a)) <
                         std::tie(std::get<0>(b), std::get<1>(b));
              });
    CsrMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    for (size_t k = 0; k < triples.size();) {
        const int r = std::get<0>(triples[k]);
        const int c = std::get<1>(triples[k]);
        double v = 0.0;
        while (k < triples.size() && std::get<0>(triples[k]) == r && std::get<1>(triples[k]) == c) {
            v += std::get<2>(triples[k]);
            ++k;
        }
        m.col_idx.push_back(c);
        m.values.push_back(v);
        m.row_ptr[r + 1] = static_cast<int>(m.col_idx.size());
    }
    for (int r = 0; r < rows; ++r) m.row_ptr[r + 1] = std::max(m.row_ptr[r + 1], m.row_ptr[r]);
    return m;
}

CsrMatrix CsrMatrix::transposed() const {
    CsrMatrix t;
    t.rows = cols;
    t.cols = rows;
    t.row_ptr.assign(cols + 1, 0);
    t.col_idx.resize(col_idx.size());
    t.values.resize(values.size());
    for (int c : col_idx) ++t.row_ptr[c + 1];
    for (int i = 0; i < cols; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
    std::vector<int> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
    for (int r = 0; r < rows; ++r) {
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            const int pos = cursor[col_idx[k]]++;
            t.col_idx[pos] = r;
            t.values[pos] = values[k];
        }
    }
    return t;
}

Tensor CsrMatrix::to_dense() const {
    Tensor d(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) d(r, col_idx[k]) += values[k];
    return d;
}

bool CsrMatrix::is_symmetric() const {
    if (rows != cols) return false;
    const CsrMatrix t = transposed();
    return t.row_ptr == row_ptr && t.col_idx == col_idx && t.values == values;
}

// --------------------------------- Ops ---------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    const int n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out(n, m);
    {
        const double* ap = a.data().data();
        const double* bp = b.data().data();
        double* op = out.data().data();
        for (int i = 0; i < n; ++i) {
            const double* arow = ap + static_cast<size_t>(i) * k;
            double* orow = op + static_cast<size_t>(i) * m;
            for (int kk = 0; kk < k; ++kk) {
                const double av = arow[kk];
                if (av == 0.0) continue;
                const double* brow = bp + static_cast<size_t>(kk) * m;
                for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
            }
        }
    }
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [ai, bi, oi, n, k, m] {
            const double* go = oi->grad.data();
            if (ai->grad_active) {
                double* ga = ai->grad.data();
                const double* bp = bi->values.data();
                for (int i = 0; i < n; ++i) {
                    const double* grow = go + static_cast<size_t>(i) * m;
                    double* garow = ga + static_cast<size_t>(i) * k;
                    for (int kk = 0; kk < k; ++kk) {
                        const double* brow = bp + static_cast<size_t>(kk) * m;
                        double acc = 0.0;
                        for (int j = 0; j < m; ++j) acc += grow[j] * brow[j];
                        garow[kk] += acc;
                    }
                }
            }
            if (bi->grad_active) {
                double* gb = bi->grad.data();
                const double* ap = ai->values.data();
                for (int i = 0; i < n; ++i) {
                    const double* grow = go + static_cast<size_t>(i) * m;
                    const double* arow = ap + static_cast<size_t>(i) * k;
                    for (int kk = 0; kk < k; ++kk) {
                        const double av = arow[kk];
                        if (av == 0.0) continue;
                        double* gbrow = gb + static_cast<size_t>(kk) * m;
                        for (int j = 0; j < m; ++j) gbrow[j] += av * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor spmm(const CsrPtr& s, const Tensor& d) {
    if (!s) throw ContractError("spmm: null sparse matrix");
    if (s->cols != d.rows())
        throw ContractError("spmm: sparse cols " + std::to_string(s->cols) + " vs dense rows " +
                            std::to_string(d.rows()));
    const int n = s->rows, m = d.cols();
    Tensor out(n, m);
    {
        const double* dp = d.data().data();
        double* op = out.data().data();
        for (int i = 0; i < n; ++i) {
            double* orow = op + static_cast<size_t>(i) * m;
            for (int k = s->row_ptr[i]; k < s->row_ptr[i + 1]; ++k) {
                const double v = s->values[k];
                const double* drow = dp + static_cast<size_t>(s->col_idx[k]) * m;
                for (int j = 0; j < m; ++j) orow[j] += v * drow[j];
            }
        }
    }
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&d})) {
        auto st = std::make_shared<CsrMatrix>(s->transposed());
        auto di = d.impl(), oi = out.impl();
        tape->record(out, [st, di, oi, m] {
            // dD = S^T * dOut
            const double* go = oi->grad.data();
            double* gd = di->grad.data();
            for (int i = 0; i < st->rows; ++i) {
                double* grow = gd + static_cast<size_t>(i) * m;
                for (int k = st->row_ptr[i]; k < st->row_ptr[i + 1]; ++k) {
                    const double v = st->values[k];
                    const double* gorow = go + static_cast<size_t>(st->col_idx[k]) * m;
                    for (int j = 0; j < m; ++j) grow[j] += v * gorow[j];
                }
            }
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    const bool bias = b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols();
    if (!bias && (a.rows() != b.rows() || a.cols() != b.cols())) shape_error("add", a, b);
    Tensor out(a.rows(), a.cols());
    const int n = a.rows(), c = a.cols();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) out(i, j) = a(i, j) + (bias ? b(0, j) : b(i, j));
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [ai, bi, oi, bias, n, c] {
            const double* go = oi->grad.data();
            if (ai->grad_active) {
                double* ga = ai->grad.data();
                for (size_t e = 0; e < oi->grad.size(); ++e) ga[e] += go[e];
            }
            if (bi->grad_active) {
                double* gb = bi->grad.data();
                if (bias) {
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < c; ++j) gb[j] += go[static_cast<size_t>(i) * c + j];
                } else {
                    for (size_t e = 0; e < oi->grad.size(); ++e) gb[e] += go[e];
                }
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("sub", a, b);
    Tensor out(a.rows(), a.cols());
    for (long e = 0; e < a.size(); ++e) out.data()[e] = a.data()[e] - b.data()[e];
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [ai, bi, oi] {
            const double* go = oi->grad.data();
            if (ai->grad_active)
                for (size_t e = 0; e < oi->grad.size(); ++e) ai->grad[e] += go[e];
            if (bi->grad_active)
                for (size_t e = 0; e < oi->grad.size(); ++e) bi->grad[e] -= go[e];
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a, b);
    Tensor out(a.rows(), a.cols());
    for (long e = 0; e < a.size(); ++e) out.data()[e] = a.data()[e] * b.data()[e];
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [ai, bi, oi] {
            const double* go = oi->grad.data();
            if (ai->grad_active)
                for (size_t e = 0; e < oi->grad.size(); ++e) ai->grad[e] += go[e] * bi->values[e];
            if (bi->grad_active)
                for (size_t e = 0; e < oi->grad.size(); ++e) bi->grad[e] += go[e] * ai->values[e];
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out(a.rows(), a.cols());
    for (long e = 0; e < a.size(); ++e) out.data()[e] = s * a.data()[e];
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(out, [ai, oi, s] {
            for (size_t e = 0; e < oi->grad.size(); ++e) ai->grad[e] += s * oi->grad[e];
        });
    }
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out(a.rows(), a.cols());
    for (long e = 0; e < a.size(); ++e) out.data()[e] = a.data()[e] > 0.0 ? a.data()[e] : 0.0;
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(out, [ai, oi] {
            for (size_t e = 0; e < oi->grad.size(); ++e)
                if (ai->values[e] > 0.0) ai->grad[e] += oi->grad[e];
        });
    }
    return out;
}

Tensor sigmoid(const Tensor& a) {
    Tensor out(a.rows(), a.cols());
    for (long e = 0; e < a.size(); ++e) {
        const double x = a.data()[e];
        out.data()[e] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                 : std::exp(x) / (1.0 + std::exp(x));
    }
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(out, [ai, oi] {
            for (size_t e = 0; e < oi->grad.size(); ++e) {
                const double y = oi->values[e];
                ai->grad[e] += oi->grad[e] * y * (1.0 - y);
            }
        });
    }
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) shape_error("concat_cols", a, b);
    const int n = a.rows(), ca = a.cols(), cb = b.cols();
    Tensor out(n, ca + cb);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < ca; ++j) out(i, j) = a(i, j);
        for (int j = 0; j < cb; ++j) out(i, ca + j) = b(i, j);
    }
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [ai, bi, oi, n, ca, cb] {
            const double* go = oi->grad.data();
            const int cout = ca + cb;
            if (ai->grad_active)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < ca; ++j)
                        ai->grad[static_cast<size_t>(i) * ca + j] += go[static_cast<size_t>(i) * cout + j];
            if (bi->grad_active)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < cb; ++j)
                        bi->grad[static_cast<size_t>(i) * cb + j] += go[static_cast<size_t>(i) * cout + ca + j];
        });
    }
    return out;
}

Tensor row_l2_normalize(const Tensor& a) {
    const int n = a.rows(), c = a.cols();
    Tensor out(n, c);
    auto norms = std::make_shared<std::vector<double>>(n);
    for (int i = 0; i < n; ++i) {
        double sq = 0.0;
        for (int j = 0; j < c; ++j) sq += a(i, j) * a(i, j);
        const double norm = std::sqrt(sq);
        if (!(norm > 0.0))
            throw ContractError("row_l2_normalize: zero row " + std::to_string(i));
        (*norms)[static_cast<size_t>(i)] = norm;
        for (int j = 0; j < c; ++j) out(i, j) = a(i, j) / norm;
    }
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(out, [ai, oi, norms, n, c] {
            // d x = (d y - (d y . y) y) / |x|
            for (int i = 0; i < n; ++i) {
                const double* y = oi->values.data() + static_cast<size_t>(i) * c;
                const double* gy = oi->grad.data() + static_cast<size_t>(i) * c;
                double* gx = ai->grad.data() + static_cast<size_t>(i) * c;
                double dot = 0.0;
                for (int j = 0; j < c; ++j) dot += gy[j] * y[j];
                const double inv = 1.0 / (*norms)[static_cast<size_t>(i)];
                for (int j = 0; j < c; ++j) gx[j] += (gy[j] - dot * y[j]) * inv;
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    Tensor out = Tensor::scalar(acc);
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(out, [ai, oi] {
            const double g = oi->grad[0];
            for (double& v : ai->grad) v += g;
        });
    }
    return out;
}

Tensor mean_all(const Tensor& a) {
    if (a.size() == 0) throw ContractError("mean_all: empty tensor");
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    const double inv = 1.0 / static_cast<double>(a.size());
    Tensor out = Tensor::scalar(acc * inv);
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(out, [ai, oi, inv] {
            const double g = oi->grad[0] * inv;
            for (double& v : ai->grad) v += g;
        });
    }
    return out;
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mse_loss", a, b);
    if (a.size() == 0) throw ContractError("mse_loss: empty tensors");
    double acc = 0.0;
    for (long e = 0; e < a.size(); ++e) {
        const double d = a.data()[e] - b.data()[e];
        acc += d * d;
    }
    const double inv = 1.0 / static_cast<double>(a.size());
    Tensor out = Tensor::scalar(acc * inv);
    Tape* tape = Tape::current();
    if (tape_should_record(tape, {&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [ai, bi, oi, inv] {
            const double g = oi->grad[0] * 2.0 * inv;
            for (size_t e = 0; e < ai->values.size(); ++e) {
                const double d = ai->values[e] - bi->values[e];
                if (ai->grad_active) ai->grad[e] += g * d;
                if (bi->grad_active) bi->grad[e] -= g * d;
            }
        });
    }
    return out;
}

// -------------------------------- Adam ---------------------------------------

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        m_.emplace_back(static_cast<size_t>(p.size()), 0.0);
        v_.emplace_back(static_cast<size_t>(p.size()), 0.0);
    }
}

void Adam::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = params_[pi];
        auto& impl = *p.impl();
        if (!impl.requires_grad || impl.grad.size() != impl.values.size())
            throw TrainError("Adam::step: parameter " + std::to_string(pi) + " has no gradient");
        double* w = impl.values.data();
        const double* g0 = impl.grad.data();
        double* m = m_[pi].data();
        double* v = v_[pi].data();
        for (size_t e = 0; e < impl.values.size(); ++e) {
            const double g = g0[e] + cfg_.weight_decay * w[e];
            m[e] = cfg_.beta1 * m[e] + (1.0 - cfg_.beta1) * g;
            v[e] = cfg_.beta2 * v[e] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[e] / bc1;
            const double vhat = v[e] / bc2;
            w[e] -= cfg_.step_size * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

// ---------------------------- Serialization ----------------------------------

void write_tensor(std::ostream& out, const Tensor& t) {
    const int64_t r = t.rows(), c = t.cols();
    out.write(reinterpret_cast<const char*>(&r), sizeof(r));
    out.write(reinterpret_cast<const char*>(&c), sizeof(c));
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& in) {
    int64_t r = 0, c = 0;
    in.read(reinterpret_cast<char*>(&r), sizeof(r));
    in.read(reinterpret_cast<char*>(&c), sizeof(c));
    if (!in || r < 0 || c < 0 || r > 1'000'000'000 || c > 1'000'000'000)
        throw DataError("read_tensor: corrupt header");
    Tensor t(static_cast<int>(r), static_cast<int>(c));
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw DataError("read_tensor: truncated payload");
    return t;
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_tensor: cannot open " + path);
    write_tensor(out, t);
    if (!out) throw DataError("save_tensor: write failed for " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_tensor: cannot open " + path);
    return read_tensor(in);
}

uint64_t params_checksum(std::span<const Tensor> params) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const Tensor& p : params) {
        const int64_t dims[2] = {p.rows(), p.cols()};
        h = fnv1a(dims, sizeof(dims), h);
        h = fnv1a(p.data().data(), p.data().size() * sizeof(double), h);
    }
    return h;
}

} // namespace fairgkd
