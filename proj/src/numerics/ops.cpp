#include "fump/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fump/simd/kernels.hpp"

namespace fump::num {
namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                                " and " + shape_string(b.shape()));
}

void require_same_tape(const char* op, Var a, Var b) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

std::uint32_t next_id(const Tape& t) { return static_cast<std::uint32_t>(t.node_count()); }

template <class Fn>
Var record(Tape& t, Tensor value, bool needs_grad, Fn fn) {
    const std::uint32_t oid = next_id(t);
    if (!needs_grad || !t.recording()) return t.push(std::move(value), false, nullptr);
    return t.push(std::move(value), true, [&t, oid, fn]() { fn(t, oid); });
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Var record_op(Tape& tape, Tensor value, bool needs_grad, std::function<void(Tape&, std::uint32_t)> fn) {
    return record(tape, std::move(value), needs_grad, std::move(fn));
}

Var matmul(Var a, Var b) {
    require_same_tape("matmul", a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor out = Tensor::matrix(m, n);
    simd::kernels().gemm_nn(m, n, k, av.data().data(), bv.data().data(), out.data().data(), false);
    const auto ia = a.id(), ib = b.id();
    return record(a.tape(), std::move(out), a.needs_grad() || b.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const auto& kt = simd::kernels();
        const Tensor& g = t.grad(o);
        if (t.needs_grad(ia)) {
            kt.gemm_nt(m, n, k, g.data().data(), t.value(ib).data().data(), t.grad(ia).data().data(), true);
        }
        if (t.needs_grad(ib)) {
            kt.gemm_tn_acc(m, n, k, t.value(ia).data().data(), g.data().data(), t.grad(ib).data().data());
        }
    });
}

Var matmul_nt(Var a, Var b) {
    require_same_tape("matmul_nt", a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.cols()) shape_error("matmul_nt", av, bv);
    const std::size_t m = av.rows(), n = av.cols(), k = bv.rows();
    Tensor out = Tensor::matrix(m, k);
    simd::kernels().gemm_nt(m, n, k, av.data().data(), bv.data().data(), out.data().data(), false);
    const auto ia = a.id(), ib = b.id();
    return record(a.tape(), std::move(out), a.needs_grad() || b.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const auto& kt = simd::kernels();
        const Tensor& g = t.grad(o);
        if (t.needs_grad(ia)) {
            kt.gemm_nn(m, n, k, g.data().data(), t.value(ib).data().data(), t.grad(ia).data().data(), true);
        }
        if (t.needs_grad(ib)) {
            kt.gemm_tn_acc(m, n, k, g.data().data(), t.value(ia).data().data(), t.grad(ib).data().data());
        }
    });
}

Var add(Var a, Var b) {
    require_same_tape("add", a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("add", av, bv);
    Tensor out = av;
    simd::kernels().axpy(out.size(), 1.0, bv.data().data(), out.data().data());
    const auto ia = a.id(), ib = b.id();
    return record(a.tape(), std::move(out), a.needs_grad() || b.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        for (auto id : {ia, ib}) {
            if (t.needs_grad(id)) simd::kernels().axpy(g.size(), 1.0, g.data().data(), t.grad(id).data().data());
        }
    });
}

Var sub(Var a, Var b) {
    require_same_tape("sub", a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("sub", av, bv);
    Tensor out = av;
    simd::kernels().axpy(out.size(), -1.0, bv.data().data(), out.data().data());
    const auto ia = a.id(), ib = b.id();
    return record(a.tape(), std::move(out), a.needs_grad() || b.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        if (t.needs_grad(ia)) simd::kernels().axpy(g.size(), 1.0, g.data().data(), t.grad(ia).data().data());
        if (t.needs_grad(ib)) simd::kernels().axpy(g.size(), -1.0, g.data().data(), t.grad(ib).data().data());
    });
}

Var mul(Var a, Var b) {
    require_same_tape("mul", a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("mul", av, bv);
    Tensor out(av.shape());
    simd::kernels().mul(out.size(), av.data().data(), bv.data().data(), out.data().data());
    const auto ia = a.id(), ib = b.id();
    return record(a.tape(), std::move(out), a.needs_grad() || b.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        const auto& kt = simd::kernels();
        if (t.needs_grad(ia)) kt.mul_acc(g.size(), g.data().data(), t.value(ib).data().data(), t.grad(ia).data().data());
        if (t.needs_grad(ib)) kt.mul_acc(g.size(), g.data().data(), t.value(ia).data().data(), t.grad(ib).data().data());
    });
}

Var add_row(Var a, Var row) {
    require_same_tape("add_row", a, row);
    const Tensor& av = a.value();
    const Tensor& rv = row.value();
    if (rv.rows() != 1 || rv.cols() != av.cols()) shape_error("add_row", av, rv);
    Tensor out = av;
    const std::size_t r = av.rows(), c = av.cols();
    for (std::size_t i = 0; i < r; ++i) simd::kernels().axpy(c, 1.0, rv.data().data(), out.data().data() + i * c);
    const auto ia = a.id(), ib = row.id();
    return record(a.tape(), std::move(out), a.needs_grad() || row.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        if (t.needs_grad(ia)) simd::kernels().axpy(g.size(), 1.0, g.data().data(), t.grad(ia).data().data());
        if (t.needs_grad(ib)) {
            double* gb = t.grad(ib).data().data();
            for (std::size_t i = 0; i < r; ++i) simd::kernels().axpy(c, 1.0, g.data().data() + i * c, gb);
        }
    });
}

Var mul_col(Var a, Var col) {
    require_same_tape("mul_col", a, col);
    const Tensor& av = a.value();
    const Tensor& cv = col.value();
    if (cv.cols() != 1 || cv.rows() != av.rows()) shape_error("mul_col", av, cv);
    const std::size_t r = av.rows(), c = av.cols();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out(i, j) = av(i, j) * cv[i];
    }
    const auto ia = a.id(), ib = col.id();
    return record(a.tape(), std::move(out), a.needs_grad() || col.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        if (t.needs_grad(ia)) {
            Tensor& ga = t.grad(ia);
            const Tensor& s = t.value(ib);
            for (std::size_t i = 0; i < r; ++i) simd::kernels().axpy(c, s[i], &g.data()[i * c], &ga.data()[i * c]);
        }
        if (t.needs_grad(ib)) {
            Tensor& gc = t.grad(ib);
            const Tensor& x = t.value(ia);
            for (std::size_t i = 0; i < r; ++i) gc[i] += simd::kernels().dot(c, &g.data()[i * c], &x.data()[i * c]);
        }
    });
}

Var scale(Var a, double s) {
    Tensor out = a.value();
    for (auto& v : out.data()) v *= s;
    const auto ia = a.id();
    return record(a.tape(), std::move(out), a.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        simd::kernels().axpy(g.size(), s, g.data().data(), t.grad(ia).data().data());
    });
}

Var silu(Var a) {
    const Tensor& av = a.value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * stable_sigmoid(av[i]);
    const auto ia = a.id();
    return record(a.tape(), std::move(out), a.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        const Tensor& x = t.value(ia);
        Tensor& gx = t.grad(ia);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = stable_sigmoid(x[i]);
            gx[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
        }
    });
}

Var sigmoid(Var a) {
    const Tensor& av = a.value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = stable_sigmoid(av[i]);
    const auto ia = a.id();
    return record(a.tape(), std::move(out), a.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        const Tensor& y = t.value(o);
        Tensor& gx = t.grad(ia);
        for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var softmax_rows(Var a) {
    const Tensor& av = a.value();
    const std::size_t r = av.rows(), c = av.cols();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < r; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, av(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out(i, j) = std::exp(av(i, j) - mx);
            z += out(i, j);
        }
        for (std::size_t j = 0; j < c; ++j) out(i, j) /= z;
    }
    const auto ia = a.id();
    return record(a.tape(), std::move(out), a.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        const Tensor& y = t.value(o);
        Tensor& gx = t.grad(ia);
        for (std::size_t i = 0; i < r; ++i) {
            const double d = simd::kernels().dot(c, &g.data()[i * c], &y.data()[i * c]);
            for (std::size_t j = 0; j < c; ++j) gx(i, j) += y(i, j) * (g(i, j) - d);
        }
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    const auto ia = a.id();
    return record(a.tape(), Tensor::scalar(s), a.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const double g = t.grad(o)[0];
        for (auto& v : t.grad(ia).data()) v += g;
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    if (n == 0) throw std::invalid_argument("mean: empty tensor");
    return scale(sum(a), 1.0 / n);
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no operands");
    Tape& tape = parts[0].tape();
    const std::size_t r = parts[0].rows();
    std::size_t c = 0;
    bool ng = false;
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> widths;
    for (const Var& p : parts) {
        if (p.rows() != r) shape_error("concat_cols", parts[0].value(), p.value());
        c += p.cols();
        ng = ng || p.needs_grad();
        ids.push_back(p.id());
        widths.push_back(p.cols());
    }
    Tensor out = Tensor::matrix(r, c);
    std::size_t off = 0;
    for (const Var& p : parts) {
        const Tensor& v = p.value();
        for (std::size_t i = 0; i < r; ++i) std::copy_n(&v.data()[i * v.cols()], v.cols(), &out.data()[i * c + off]);
        off += v.cols();
    }
    return record(tape, std::move(out), ng, [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < ids.size(); ++pi) {
            const std::size_t w = widths[pi];
            if (t.needs_grad(ids[pi])) {
                Tensor& gp = t.grad(ids[pi]);
                for (std::size_t i = 0; i < r; ++i) {
                    simd::kernels().axpy(w, 1.0, &g.data()[i * c + off], &gp.data()[i * w]);
                }
            }
            off += w;
        }
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no operands");
    Tape& tape = parts[0].tape();
    const std::size_t c = parts[0].cols();
    std::size_t r = 0;
    bool ng = false;
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> heights;
    for (const Var& p : parts) {
        if (p.cols() != c && p.rows() != 0) shape_error("concat_rows", parts[0].value(), p.value());
        r += p.rows();
        ng = ng || p.needs_grad();
        ids.push_back(p.id());
        heights.push_back(p.rows());
    }
    std::vector<double> data;
    data.reserve(r * c);
    for (const Var& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    Tensor out({r, c}, std::move(data));
    return record(tape, std::move(out), ng, [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < ids.size(); ++pi) {
            const std::size_t n = heights[pi] * c;
            if (n > 0 && t.needs_grad(ids[pi])) {
                simd::kernels().axpy(n, 1.0, &g.data()[off], t.grad(ids[pi]).data().data());
            }
            off += n;
        }
    });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    const Tensor& av = a.value();
    if (begin + count > av.cols()) {
        throw std::invalid_argument("slice_cols: range [" + std::to_string(begin) + ", " +
                                    std::to_string(begin + count) + ") exceeds " + std::to_string(av.cols()) +
                                    " columns");
    }
    const std::size_t r = av.rows(), c = av.cols();
    Tensor out = Tensor::matrix(r, count);
    for (std::size_t i = 0; i < r; ++i) std::copy_n(&av.data()[i * c + begin], count, &out.data()[i * count]);
    const auto ia = a.id();
    return record(a.tape(), std::move(out), a.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        Tensor& ga = t.grad(ia);
        for (std::size_t i = 0; i < r; ++i) {
            simd::kernels().axpy(count, 1.0, &g.data()[i * count], &ga.data()[i * c + begin]);
        }
    });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
    const Tensor& av = a.value();
    if (rows * cols != av.size()) {
        throw std::invalid_argument("reshape: cannot view " + shape_string(av.shape()) + " as [" +
                                    std::to_string(rows) + "x" + std::to_string(cols) + "]");
    }
    Tensor out({rows, cols}, std::vector<double>(av.data().begin(), av.data().end()));
    const auto ia = a.id();
    return record(a.tape(), std::move(out), a.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        simd::kernels().axpy(g.size(), 1.0, g.data().data(), t.grad(ia).data().data());
    });
}

Var broadcast_rows(Var row, std::size_t rows) {
    const Tensor& rv = row.value();
    if (rv.rows() != 1) throw std::invalid_argument("broadcast_rows: operand must be a single row");
    const std::size_t c = rv.cols();
    Tensor out = Tensor::matrix(rows, c);
    for (std::size_t i = 0; i < rows; ++i) std::copy_n(rv.data().data(), c, &out.data()[i * c]);
    const auto ia = row.id();
    return record(row.tape(), std::move(out), row.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        Tensor& gr = t.grad(ia);
        for (std::size_t i = 0; i < rows; ++i) simd::kernels().axpy(c, 1.0, &g.data()[i * c], gr.data().data());
    });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
    const Tensor& av = a.value();
    const std::size_t c = av.cols();
    Tensor out = Tensor::matrix(index.size(), c);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= av.rows()) throw std::out_of_range("gather_rows: row index out of range");
        std::copy_n(&av.data()[index[i] * c], c, &out.data()[i * c]);
    }
    const auto ia = a.id();
    std::vector<std::size_t> idx(index.begin(), index.end());
    return record(a.tape(), std::move(out), a.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        Tensor& ga = t.grad(ia);
        for (std::size_t i = 0; i < idx.size(); ++i) simd::kernels().axpy(c, 1.0, &g.data()[i * c], &ga.data()[idx[i] * c]);
    });
}

Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t rows) {
    const Tensor& av = a.value();
    if (index.size() != av.rows()) throw std::invalid_argument("scatter_add_rows: index length mismatch");
    const std::size_t c = av.cols();
    Tensor out = Tensor::matrix(rows, c);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= rows) throw std::out_of_range("scatter_add_rows: row index out of range");
        simd::kernels().axpy(c, 1.0, &av.data()[i * c], &out.data()[index[i] * c]);
    }
    const auto ia = a.id();
    std::vector<std::size_t> idx(index.begin(), index.end());
    return record(a.tape(), std::move(out), a.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        Tensor& ga = t.grad(ia);
        for (std::size_t i = 0; i < idx.size(); ++i) simd::kernels().axpy(c, 1.0, &g.data()[idx[i] * c], &ga.data()[i * c]);
    });
}

Var segment_max(Var a, const std::vector<std::vector<std::size_t>>& groups) {
    const Tensor& av = a.value();
    const std::size_t c = av.cols();
    Tensor out = Tensor::matrix(groups.size(), c);
    std::vector<std::size_t> argmax(groups.size() * c, 0);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& grp = groups[gi];
        if (grp.empty()) continue;
        for (std::size_t j = 0; j < c; ++j) {
            std::size_t best = grp[0];
            for (std::size_t r : grp) {
                if (av(r, j) > av(best, j)) best = r;
            }
            out(gi, j) = av(best, j);
            argmax[gi * c + j] = best;
        }
    }
    const auto ia = a.id();
    std::vector<bool> nonempty;
    for (const auto& grp : groups) nonempty.push_back(!grp.empty());
    return record(a.tape(), std::move(out), a.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        Tensor& ga = t.grad(ia);
        for (std::size_t gi = 0; gi < nonempty.size(); ++gi) {
            if (!nonempty[gi]) continue;
            for (std::size_t j = 0; j < c; ++j) ga(argmax[gi * c + j], j) += g(gi, j);
        }
    });
}

Var cumsum_steps(Var a, std::size_t modes, std::size_t steps) {
    const Tensor& av = a.value();
    if (av.cols() != modes * steps * 2) {
        throw std::invalid_argument("cumsum_steps: expected " + std::to_string(modes * steps * 2) +
                                    " columns, got " + std::to_string(av.cols()));
    }
    const std::size_t r = av.rows(), c = av.cols();
    Tensor out = av;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t m = 0; m < modes; ++m) {
            double* blk = &out.data()[i * c + m * steps * 2];
            for (std::size_t s = 1; s < steps; ++s) {
                blk[2 * s] += blk[2 * (s - 1)];
                blk[2 * s + 1] += blk[2 * (s - 1) + 1];
            }
        }
    }
    const auto ia = a.id();
    return record(a.tape(), std::move(out), a.needs_grad(), [=](Tape& t, std::uint32_t o) {
        const Tensor& g = t.grad(o);
        Tensor& ga = t.grad(ia);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t m = 0; m < modes; ++m) {
                const double* gb = &g.data()[i * c + m * steps * 2];
                double* db = &ga.data()[i * c + m * steps * 2];
                double ax = 0.0, ay = 0.0;
                for (std::size_t s = steps; s-- > 0;) {
                    ax += gb[2 * s];
                    ay += gb[2 * s + 1];
                    db[2 * s] += ax;
                    db[2 * s + 1] += ay;
                }
            }
        }
    });
}

Var detach(Var a) { return a.tape().constant(a.value()); }

}  // namespace fump::num
