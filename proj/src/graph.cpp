#include "nmtattack/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nmtattack {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

Var Graph::push(Shape shape, std::vector<double> value, std::vector<int> parents,
                std::function<void(Graph&, int)> vjp) {
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.requires_grad = any_requires(n.parents);
    if (n.requires_grad) n.vjp = std::move(vjp);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

bool Graph::any_requires(const std::vector<int>& parents) const {
    for (int p : parents)
        if (nodes_[static_cast<std::size_t>(p)].requires_grad) return true;
    return false;
}

void Graph::check_rank2(Var v, const char* op) const {
    if (shape(v).size() != 2)
        throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(shape(v)));
}

void Graph::check_same_shape(Var a, Var b, const char* op) const {
    if (shape(a) != shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(shape(a)) + " vs " +
                             shape_str(shape(b)));
}

double Graph::scalar_value(Var v) const {
    const Node& n = node(v);
    if (n.value.size() != 1)
        throw DimensionError("scalar_value on tensor of shape " + shape_str(n.shape));
    return n.value[0];
}

Var Graph::leaf(const Tensor& t) {
    Node n;
    n.shape = t.shape;
    n.value = t.data;
    n.requires_grad = t.requires_grad;
    n.source = &t;
    if (n.requires_grad) {
        n.vjp = [](Graph& g, int self) {
            Node& me = g.nodes_[static_cast<std::size_t>(self)];
            if (me.source->grad.size() != me.value.size())
                me.source->grad.assign(me.value.size(), 0.0);
            for (std::size_t i = 0; i < me.value.size(); ++i) me.source->grad[i] += me.grad[i];
        };
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        throw DimensionError("constant: data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    return push(std::move(shape), std::move(data), {}, {});
}

Var Graph::scalar(double x) { return constant({1}, {x}); }

Var Graph::matmul(Var a, Var b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const int m = shape(a)[0], n = shape(a)[1], n2 = shape(b)[0], p = shape(b)[1];
    if (n != n2)
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(shape(a)) + " * " +
                             shape_str(shape(b)));
    std::vector<double> out(static_cast<std::size_t>(m) * p, 0.0);
    const double* A = value(a).data();
    const double* B = value(b).data();
    for (int i = 0; i < m; ++i) {
        double* outi = out.data() + static_cast<std::size_t>(i) * p;
        const double* Ai = A + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < n; ++k) {
            const double aik = Ai[k];
            if (aik == 0.0) continue;
            const double* Bk = B + static_cast<std::size_t>(k) * p;
            for (int j = 0; j < p; ++j) outi[j] += aik * Bk[j];
        }
    }
    auto vjp = [a, b, m, n, p](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        const double* A = g.value(a).data();
        const double* B = g.value(b).data();
        if (g.node(a).requires_grad) {
            // dA = dC * B^T
            std::vector<double>& ga = g.grad_buf(a.id);
            for (int i = 0; i < m; ++i) {
                const double* gci = gc.data() + static_cast<std::size_t>(i) * p;
                double* gai = ga.data() + static_cast<std::size_t>(i) * n;
                for (int k = 0; k < n; ++k) {
                    const double* Bk = B + static_cast<std::size_t>(k) * p;
                    double acc = 0.0;
                    for (int j = 0; j < p; ++j) acc += gci[j] * Bk[j];
                    gai[k] += acc;
                }
            }
        }
        if (g.node(b).requires_grad) {
            // dB = A^T * dC
            std::vector<double>& gb = g.grad_buf(b.id);
            for (int i = 0; i < m; ++i) {
                const double* Ai = A + static_cast<std::size_t>(i) * n;
                const double* gci = gc.data() + static_cast<std::size_t>(i) * p;
                for (int k = 0; k < n; ++k) {
                    const double aik = Ai[k];
                    if (aik == 0.0) continue;
                    double* gbk = gb.data() + static_cast<std::size_t>(k) * p;
                    for (int j = 0; j < p; ++j) gbk[j] += aik * gci[j];
                }
            }
        }
    };
    return push({m, p}, std::move(out), {a.id, b.id}, vjp);
}

Var Graph::transpose(Var a) {
    check_rank2(a, "transpose");
    const int r = shape(a)[0], c = shape(a)[1];
    std::vector<double> out(static_cast<std::size_t>(r) * c);
    const std::vector<double>& in = value(a);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j) * r + i] = in[static_cast<std::size_t>(i) * c + j];
    auto vjp = [a, r, c](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        std::vector<double>& ga = g.grad_buf(a.id);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                ga[static_cast<std::size_t>(i) * c + j] += gc[static_cast<std::size_t>(j) * r + i];
    };
    return push({c, r}, std::move(out), {a.id}, vjp);
}

Var Graph::add(Var a, Var b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(value(a));
    const std::vector<double>& vb = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    auto vjp = [a, b](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        if (g.node(a).requires_grad) {
            std::vector<double>& ga = g.grad_buf(a.id);
            for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
        }
        if (g.node(b).requires_grad) {
            std::vector<double>& gb = g.grad_buf(b.id);
            for (std::size_t i = 0; i < gc.size(); ++i) gb[i] += gc[i];
        }
    };
    return push(shape(a), std::move(out), {a.id, b.id}, vjp);
}

Var Graph::sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(value(a));
    const std::vector<double>& vb = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    auto vjp = [a, b](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        if (g.node(a).requires_grad) {
            std::vector<double>& ga = g.grad_buf(a.id);
            for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
        }
        if (g.node(b).requires_grad) {
            std::vector<double>& gb = g.grad_buf(b.id);
            for (std::size_t i = 0; i < gc.size(); ++i) gb[i] -= gc[i];
        }
    };
    return push(shape(a), std::move(out), {a.id, b.id}, vjp);
}

Var Graph::mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(value(a));
    const std::vector<double>& vb = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    auto vjp = [a, b](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        const std::vector<double>& va = g.value(a);
        const std::vector<double>& vb = g.value(b);
        if (g.node(a).requires_grad) {
            std::vector<double>& ga = g.grad_buf(a.id);
            for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i] * vb[i];
        }
        if (g.node(b).requires_grad) {
            std::vector<double>& gb = g.grad_buf(b.id);
            for (std::size_t i = 0; i < gc.size(); ++i) gb[i] += gc[i] * va[i];
        }
    };
    return push(shape(a), std::move(out), {a.id, b.id}, vjp);
}

Var Graph::scale(Var a, double s) {
    std::vector<double> out(value(a));
    for (double& x : out) x *= s;
    auto vjp = [a, s](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        std::vector<double>& ga = g.grad_buf(a.id);
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += s * gc[i];
    };
    return push(shape(a), std::move(out), {a.id}, vjp);
}

static void check_rowvec(const Shape& m, const Shape& v, const char* op) {
    const bool ok = v.size() == 1 && m.size() == 2 && v[0] == m[1];
    if (!ok)
        throw DimensionError(std::string(op) + ": expected [r x c] with [c], got " + shape_str(m) +
                             " with " + shape_str(v));
}

Var Graph::add_rowvec(Var m, Var v) {
    check_rowvec(shape(m), shape(v), "add_rowvec");
    const int r = shape(m)[0], c = shape(m)[1];
    std::vector<double> out(value(m));
    const std::vector<double>& vv = value(v);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(i) * c + j] += vv[static_cast<std::size_t>(j)];
    auto vjp = [m, v, r, c](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        if (g.node(m).requires_grad) {
            std::vector<double>& gm = g.grad_buf(m.id);
            for (std::size_t i = 0; i < gc.size(); ++i) gm[i] += gc[i];
        }
        if (g.node(v).requires_grad) {
            std::vector<double>& gv = g.grad_buf(v.id);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) gv[static_cast<std::size_t>(j)] += gc[static_cast<std::size_t>(i) * c + j];
        }
    };
    return push(shape(m), std::move(out), {m.id, v.id}, vjp);
}

Var Graph::mul_rowvec(Var m, Var v) {
    check_rowvec(shape(m), shape(v), "mul_rowvec");
    const int r = shape(m)[0], c = shape(m)[1];
    std::vector<double> out(value(m));
    const std::vector<double>& vv = value(v);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(i) * c + j] *= vv[static_cast<std::size_t>(j)];
    auto vjp = [m, v, r, c](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        const std::vector<double>& vm = g.value(m);
        const std::vector<double>& vv = g.value(v);
        if (g.node(m).requires_grad) {
            std::vector<double>& gm = g.grad_buf(m.id);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) {
                    const std::size_t idx = static_cast<std::size_t>(i) * c + j;
                    gm[idx] += gc[idx] * vv[static_cast<std::size_t>(j)];
                }
        }
        if (g.node(v).requires_grad) {
            std::vector<double>& gv = g.grad_buf(v.id);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) {
                    const std::size_t idx = static_cast<std::size_t>(i) * c + j;
                    gv[static_cast<std::size_t>(j)] += gc[idx] * vm[idx];
                }
        }
    };
    return push(shape(m), std::move(out), {m.id, v.id}, vjp);
}

Var Graph::relu(Var a) {
    std::vector<double> out(value(a));
    for (double& x : out) x = x > 0.0 ? x : 0.0;
    auto vjp = [a](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        const std::vector<double>& va = g.value(a);
        std::vector<double>& ga = g.grad_buf(a.id);
        for (std::size_t i = 0; i < gc.size(); ++i)
            if (va[i] > 0.0) ga[i] += gc[i];
    };
    return push(shape(a), std::move(out), {a.id}, vjp);
}

Var Graph::log(Var a) {
    std::vector<double> out(value(a));
    for (double& x : out) x = std::log(x);
    auto vjp = [a](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        const std::vector<double>& va = g.value(a);
        std::vector<double>& ga = g.grad_buf(a.id);
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i] / va[i];
    };
    return push(shape(a), std::move(out), {a.id}, vjp);
}

Var Graph::exp(Var a) {
    std::vector<double> out(value(a));
    for (double& x : out) x = std::exp(x);
    auto vjp = [a](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        const std::vector<double>& vo = g.nodes_[static_cast<std::size_t>(self)].value;
        std::vector<double>& ga = g.grad_buf(a.id);
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i] * vo[i];
    };
    return push(shape(a), std::move(out), {a.id}, vjp);
}

Var Graph::layer_norm(Var a, double eps) {
    check_rank2(a, "layer_norm");
    const int r = shape(a)[0], c = shape(a)[1];
    const std::vector<double>& in = value(a);
    std::vector<double> out(in.size());
    for (int i = 0; i < r; ++i) {
        const double* row = in.data() + static_cast<std::size_t>(i) * c;
        double mu = 0.0;
        for (int j = 0; j < c; ++j) mu += row[j];
        mu /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= c;
        const double inv = 1.0 / std::sqrt(var + eps);
        double* orow = out.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) orow[j] = (row[j] - mu) * inv;
    }
    auto vjp = [a, r, c, eps](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        const std::vector<double>& y = g.nodes_[static_cast<std::size_t>(self)].value;
        const std::vector<double>& in = g.value(a);
        std::vector<double>& ga = g.grad_buf(a.id);
        for (int i = 0; i < r; ++i) {
            const double* row = in.data() + static_cast<std::size_t>(i) * c;
            const double* dy = gc.data() + static_cast<std::size_t>(i) * c;
            const double* yi = y.data() + static_cast<std::size_t>(i) * c;
            double mu = 0.0;
            for (int j = 0; j < c; ++j) mu += row[j];
            mu /= c;
            double var = 0.0;
            for (int j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
            var /= c;
            const double inv = 1.0 / std::sqrt(var + eps);
            double mean_dy = 0.0, mean_dy_y = 0.0;
            for (int j = 0; j < c; ++j) {
                mean_dy += dy[j];
                mean_dy_y += dy[j] * yi[j];
            }
            mean_dy /= c;
            mean_dy_y /= c;
            double* gai = ga.data() + static_cast<std::size_t>(i) * c;
            for (int j = 0; j < c; ++j) gai[j] += inv * (dy[j] - mean_dy - yi[j] * mean_dy_y);
        }
    };
    return push(shape(a), std::move(out), {a.id}, vjp);
}

Var Graph::softmax_rows(Var a) {
    check_rank2(a, "softmax_rows");
    const int r = shape(a)[0], c = shape(a)[1];
    const std::vector<double>& in = value(a);
    std::vector<double> out(in.size());
    for (int i = 0; i < r; ++i) {
        const double* row = in.data() + static_cast<std::size_t>(i) * c;
        double* orow = out.data() + static_cast<std::size_t>(i) * c;
        double m = row[0];
        for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (int j = 0; j < c; ++j) {
            orow[j] = std::exp(row[j] - m);
            z += orow[j];
        }
        for (int j = 0; j < c; ++j) orow[j] /= z;
    }
    auto vjp = [a, r, c](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        const std::vector<double>& y = g.nodes_[static_cast<std::size_t>(self)].value;
        std::vector<double>& ga = g.grad_buf(a.id);
        for (int i = 0; i < r; ++i) {
            const double* dy = gc.data() + static_cast<std::size_t>(i) * c;
            const double* yi = y.data() + static_cast<std::size_t>(i) * c;
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += dy[j] * yi[j];
            double* gai = ga.data() + static_cast<std::size_t>(i) * c;
            for (int j = 0; j < c; ++j) gai[j] += yi[j] * (dy[j] - dot);
        }
    };
    return push(shape(a), std::move(out), {a.id}, vjp);
}

Var Graph::cross_entropy(Var logits, const std::vector<int>& targets, int ignore_id) {
    check_rank2(logits, "cross_entropy");
    const int t = shape(logits)[0], v = shape(logits)[1];
    if (static_cast<int>(targets.size()) != t)
        throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                             std::to_string(t) + " logit rows");
    int count = 0;
    for (int tgt : targets) {
        if (tgt == ignore_id) continue;
        if (tgt < 0 || tgt >= v)
            throw IndexError("cross_entropy: target id " + std::to_string(tgt) +
                             " out of range for vocabulary of " + std::to_string(v));
        ++count;
    }
    if (count == 0) throw InputError("cross_entropy: every position is flagged as padding");
    const std::vector<double>& in = value(logits);
    double loss = 0.0;
    for (int i = 0; i < t; ++i) {
        if (targets[static_cast<std::size_t>(i)] == ignore_id) continue;
        const double* row = in.data() + static_cast<std::size_t>(i) * v;
        double m = row[0];
        for (int j = 1; j < v; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (int j = 0; j < v; ++j) z += std::exp(row[j] - m);
        loss += m + std::log(z) - row[targets[static_cast<std::size_t>(i)]];
    }
    loss /= count;
    auto vjp = [logits, targets, ignore_id, t, v, count](Graph& g, int self) {
        const double up = g.grad_buf(self)[0];
        const std::vector<double>& in = g.value(logits);
        std::vector<double>& gl = g.grad_buf(logits.id);
        for (int i = 0; i < t; ++i) {
            const int tgt = targets[static_cast<std::size_t>(i)];
            if (tgt == ignore_id) continue;
            const double* row = in.data() + static_cast<std::size_t>(i) * v;
            double m = row[0];
            for (int j = 1; j < v; ++j) m = std::max(m, row[j]);
            double z = 0.0;
            for (int j = 0; j < v; ++j) z += std::exp(row[j] - m);
            double* grow = gl.data() + static_cast<std::size_t>(i) * v;
            const double s = up / count;
            for (int j = 0; j < v; ++j) {
                const double p = std::exp(row[j] - m) / z;
                grow[j] += s * (p - (j == tgt ? 1.0 : 0.0));
            }
        }
    };
    return push({1}, {loss}, {logits.id}, vjp);
}

Var Graph::cosine_rows(Var a, Var b) {
    check_rank2(a, "cosine_rows");
    check_same_shape(a, b, "cosine_rows");
    const int k = shape(a)[0], d = shape(a)[1];
    const std::vector<double>& va = value(a);
    const std::vector<double>& vb = value(b);
    std::vector<double> out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const double* ra = va.data() + static_cast<std::size_t>(i) * d;
        const double* rb = vb.data() + static_cast<std::size_t>(i) * d;
        double na = 0.0, nb = 0.0, dot = 0.0;
        for (int j = 0; j < d; ++j) {
            na += ra[j] * ra[j];
            nb += rb[j] * rb[j];
            dot += ra[j] * rb[j];
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        if (na < 1e-12 || nb < 1e-12)
            throw DegenerateVectorError("cosine_rows: row " + std::to_string(i) +
                                        " has near-zero norm");
        out[static_cast<std::size_t>(i)] = dot / (na * nb);
    }
    auto vjp = [a, b, k, d](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        const std::vector<double>& va = g.value(a);
        const std::vector<double>& vb = g.value(b);
        const std::vector<double>& c = g.nodes_[static_cast<std::size_t>(self)].value;
        for (int i = 0; i < k; ++i) {
            const double up = gc[static_cast<std::size_t>(i)];
            if (up == 0.0) continue;
            const double* ra = va.data() + static_cast<std::size_t>(i) * d;
            const double* rb = vb.data() + static_cast<std::size_t>(i) * d;
            double na = 0.0, nb = 0.0;
            for (int j = 0; j < d; ++j) {
                na += ra[j] * ra[j];
                nb += rb[j] * rb[j];
            }
            na = std::sqrt(na);
            nb = std::sqrt(nb);
            const double ci = c[static_cast<std::size_t>(i)];
            if (g.node(a).requires_grad) {
                double* ga = g.grad_buf(a.id).data() + static_cast<std::size_t>(i) * d;
                for (int j = 0; j < d; ++j) ga[j] += up * (rb[j] / (na * nb) - ci * ra[j] / (na * na));
            }
            if (g.node(b).requires_grad) {
                double* gb = g.grad_buf(b.id).data() + static_cast<std::size_t>(i) * d;
                for (int j = 0; j < d; ++j) gb[j] += up * (ra[j] / (na * nb) - ci * rb[j] / (nb * nb));
            }
        }
    };
    return push({k}, std::move(out), {a.id, b.id}, vjp);
}

Var Graph::mean(Var a) {
    const std::vector<double>& in = value(a);
    double s = 0.0;
    for (double x : in) s += x;
    const double n = static_cast<double>(in.size());
    auto vjp = [a, n](Graph& g, int self) {
        const double up = g.grad_buf(self)[0] / n;
        std::vector<double>& ga = g.grad_buf(a.id);
        for (double& x : ga) x += up;
    };
    return push({1}, {s / n}, {a.id}, vjp);
}

Var Graph::sum(Var a) {
    const std::vector<double>& in = value(a);
    double s = 0.0;
    for (double x : in) s += x;
    auto vjp = [a](Graph& g, int self) {
        const double up = g.grad_buf(self)[0];
        std::vector<double>& ga = g.grad_buf(a.id);
        for (double& x : ga) x += up;
    };
    return push({1}, {s}, {a.id}, vjp);
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no parts");
    check_rank2(parts[0], "concat_rows");
    const int c = shape(parts[0])[1];
    int total = 0;
    std::vector<int> parents;
    for (Var p : parts) {
        check_rank2(p, "concat_rows");
        if (shape(p)[1] != c)
            throw DimensionError("concat_rows: column mismatch " + shape_str(shape(parts[0])) +
                                 " vs " + shape_str(shape(p)));
        total += shape(p)[0];
        parents.push_back(p.id);
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(total) * c);
    for (Var p : parts) out.insert(out.end(), value(p).begin(), value(p).end());
    auto parts_copy = parts;
    auto vjp = [parts_copy, c](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        std::size_t off = 0;
        for (Var p : parts_copy) {
            const std::size_t n = g.value(p).size();
            if (g.node(p).requires_grad) {
                std::vector<double>& gp = g.grad_buf(p.id);
                for (std::size_t i = 0; i < n; ++i) gp[i] += gc[off + i];
            }
            off += n;
        }
    };
    return push({total, c}, std::move(out), std::move(parents), vjp);
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no parts");
    check_rank2(parts[0], "concat_cols");
    const int r = shape(parts[0])[0];
    int total = 0;
    std::vector<int> parents;
    for (Var p : parts) {
        check_rank2(p, "concat_cols");
        if (shape(p)[0] != r)
            throw DimensionError("concat_cols: row mismatch " + shape_str(shape(parts[0])) + " vs " +
                                 shape_str(shape(p)));
        total += shape(p)[1];
        parents.push_back(p.id);
    }
    std::vector<double> out(static_cast<std::size_t>(r) * total);
    int coff = 0;
    for (Var p : parts) {
        const int pc = shape(p)[1];
        const std::vector<double>& pv = value(p);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < pc; ++j)
                out[static_cast<std::size_t>(i) * total + coff + j] = pv[static_cast<std::size_t>(i) * pc + j];
        coff += pc;
    }
    auto parts_copy = parts;
    auto vjp = [parts_copy, r, total](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        int coff = 0;
        for (Var p : parts_copy) {
            const int pc = g.shape(p)[1];
            if (g.node(p).requires_grad) {
                std::vector<double>& gp = g.grad_buf(p.id);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < pc; ++j)
                        gp[static_cast<std::size_t>(i) * pc + j] +=
                            gc[static_cast<std::size_t>(i) * total + coff + j];
            }
            coff += pc;
        }
    };
    return push({r, total}, std::move(out), std::move(parents), vjp);
}

Var Graph::slice_cols(Var a, int start, int count) {
    check_rank2(a, "slice_cols");
    const int r = shape(a)[0], c = shape(a)[1];
    if (start < 0 || count < 1 || start + count > c)
        throw DimensionError("slice_cols: range [" + std::to_string(start) + ", " +
                             std::to_string(start + count) + ") out of " + shape_str(shape(a)));
    const std::vector<double>& in = value(a);
    std::vector<double> out(static_cast<std::size_t>(r) * count);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < count; ++j)
            out[static_cast<std::size_t>(i) * count + j] = in[static_cast<std::size_t>(i) * c + start + j];
    auto vjp = [a, start, count, r, c](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        std::vector<double>& ga = g.grad_buf(a.id);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < count; ++j)
                ga[static_cast<std::size_t>(i) * c + start + j] += gc[static_cast<std::size_t>(i) * count + j];
    };
    return push({r, count}, std::move(out), {a.id}, vjp);
}

Var Graph::gather_rows(Var a, const std::vector<int>& ids) {
    check_rank2(a, "gather_rows");
    const int r = shape(a)[0], c = shape(a)[1];
    std::vector<double> out(ids.size() * static_cast<std::size_t>(c));
    const std::vector<double>& in = value(a);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || id >= r)
            throw IndexError("gather_rows: row id " + std::to_string(id) + " out of " +
                             shape_str(shape(a)));
        std::copy_n(in.data() + static_cast<std::size_t>(id) * c, c, out.data() + i * c);
    }
    auto vjp = [a, ids, c](Graph& g, int self) {
        const std::vector<double>& gc = g.grad_buf(self);
        std::vector<double>& ga = g.grad_buf(a.id);
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < c; ++j)
                ga[static_cast<std::size_t>(ids[i]) * c + j] += gc[i * static_cast<std::size_t>(c) + j];
    };
    return push({static_cast<int>(ids.size()), c}, std::move(out), {a.id}, vjp);
}

void Graph::backward(Var loss) {
    const Node& l = node(loss);
    if (shape_numel(l.shape) != 1)
        throw DimensionError("backward: loss must be scalar, got " + shape_str(l.shape));
    if (!l.requires_grad) return;  // nothing reachable requires grad
    for (int i = 0; i <= loss.id; ++i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.requires_grad) n.grad.assign(n.value.size(), 0.0);
    }
    nodes_[static_cast<std::size_t>(loss.id)].grad[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.requires_grad && n.vjp) n.vjp(*this, i);
    }
}

}  // namespace nmtattack
