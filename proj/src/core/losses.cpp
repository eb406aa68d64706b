// SPDX-License-Identifier: Apache-2.0
#include "core/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/errors.hpp"
#include "core/ops.hpp"

namespace scriptgen {

namespace {
constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kLogZero) return b;
    if (b == kLogZero) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(std::min(a, b) - m));
}
} // namespace

Tensor hinge_generator_loss(const Tensor& d_fake_scores) {
    if (d_fake_scores.numel() == 0) throw ValueError("hinge_generator_loss: empty scores");
    if (!d_fake_scores.all_finite()) throw ValueError("hinge_generator_loss: non-finite scores");
    return ops::mean_all(ops::neg(d_fake_scores));
}

Tensor hinge_discriminator_loss(const Tensor& d_real_scores, const Tensor& d_fake_scores) {
    if (d_real_scores.numel() == 0 || d_fake_scores.numel() == 0)
        throw ValueError("hinge_discriminator_loss: empty scores");
    if (!d_real_scores.all_finite() || !d_fake_scores.all_finite())
        throw ValueError("hinge_discriminator_loss: non-finite scores");
    Tensor real_term = ops::mean_all(ops::relu(ops::add_scalar(ops::neg(d_real_scores), 1.0)));
    Tensor fake_term = ops::mean_all(ops::relu(ops::add_scalar(d_fake_scores, 1.0)));
    return ops::add(real_term, fake_term);
}

Tensor ctc_loss_single(const Tensor& logits, const std::vector<int64_t>& target, int64_t blank) {
    if (logits.ndim() != 2) throw ShapeError("ctc: logits must be (T, C)");
    const int64_t T = logits.dim(0), C = logits.dim(1);
    if (blank != C - 1) throw ValueError("ctc: blank must be the last class");
    if (target.empty()) throw ValueError("ctc: empty target");
    int64_t repeats = 0;
    for (size_t i = 0; i < target.size(); ++i) {
        if (target[i] < 0 || target[i] >= blank)
            throw ValueError("ctc: target id out of range");
        if (i > 0 && target[i] == target[i - 1]) ++repeats;
    }
    const int64_t U = static_cast<int64_t>(target.size());
    if (T < U + repeats)
        throw ValueError("ctc: target of length " + std::to_string(U) + " with " +
                         std::to_string(repeats) + " repeats does not fit in " + std::to_string(T) +
                         " frames");
    // Log-softmax per frame.
    std::vector<double> lp(static_cast<size_t>(T * C));
    for (int64_t t = 0; t < T; ++t) {
        const double* row = logits.data().data() + t * C;
        double mx = row[0];
        for (int64_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int64_t c = 0; c < C; ++c) z += std::exp(row[c] - mx);
        const double lse = mx + std::log(z);
        for (int64_t c = 0; c < C; ++c) lp[static_cast<size_t>(t * C + c)] = row[c] - lse;
    }
    // Extended label sequence with interleaved blanks.
    const int64_t S = 2 * U + 1;
    std::vector<int64_t> z(static_cast<size_t>(S), blank);
    for (int64_t i = 0; i < U; ++i) z[static_cast<size_t>(2 * i + 1)] = target[static_cast<size_t>(i)];
    auto LP = [&](int64_t t, int64_t s) { return lp[static_cast<size_t>(t * C + z[static_cast<size_t>(s)])]; };
    std::vector<double> alpha(static_cast<size_t>(T * S), kLogZero);
    alpha[0] = LP(0, 0);
    if (S > 1) alpha[1] = LP(0, 1);
    for (int64_t t = 1; t < T; ++t)
        for (int64_t s = 0; s < S; ++s) {
            double a = alpha[static_cast<size_t>((t - 1) * S + s)];
            if (s >= 1) a = log_add(a, alpha[static_cast<size_t>((t - 1) * S + s - 1)]);
            if (s >= 2 && z[static_cast<size_t>(s)] != blank &&
                z[static_cast<size_t>(s)] != z[static_cast<size_t>(s - 2)])
                a = log_add(a, alpha[static_cast<size_t>((t - 1) * S + s - 2)]);
            alpha[static_cast<size_t>(t * S + s)] = a == kLogZero ? kLogZero : a + LP(t, s);
        }
    double log_p = alpha[static_cast<size_t>((T - 1) * S + S - 1)];
    if (S > 1) log_p = log_add(log_p, alpha[static_cast<size_t>((T - 1) * S + S - 2)]);
    if (log_p == kLogZero) throw ValueError("ctc: no admissible alignment");
    const double loss = -log_p;
    // Beta recursion (emission included) for the gradient.
    std::vector<double> beta(static_cast<size_t>(T * S), kLogZero);
    beta[static_cast<size_t>((T - 1) * S + S - 1)] = LP(T - 1, S - 1);
    if (S > 1) beta[static_cast<size_t>((T - 1) * S + S - 2)] = LP(T - 1, S - 2);
    for (int64_t t = T - 2; t >= 0; --t)
        for (int64_t s = S - 1; s >= 0; --s) {
            double b = beta[static_cast<size_t>((t + 1) * S + s)];
            if (s + 1 < S) b = log_add(b, beta[static_cast<size_t>((t + 1) * S + s + 1)]);
            if (s + 2 < S && z[static_cast<size_t>(s + 2)] != blank &&
                z[static_cast<size_t>(s + 2)] != z[static_cast<size_t>(s)])
                b = log_add(b, beta[static_cast<size_t>((t + 1) * S + s + 2)]);
            beta[static_cast<size_t>(t * S + s)] = b == kLogZero ? kLogZero : b + LP(t, s);
        }
    // d(-log p)/d logits[t][c] = softmax[t][c] - sum_{s: z_s = c}
    // exp(alpha[t][s] + beta[t][s] - lp[t][z_s] - log p)
    auto grad = std::make_shared<std::vector<double>>(static_cast<size_t>(T * C));
    for (int64_t t = 0; t < T; ++t) {
        std::vector<double> occ(static_cast<size_t>(C), kLogZero);
        for (int64_t s = 0; s < S; ++s) {
            const double a = alpha[static_cast<size_t>(t * S + s)];
            const double b = beta[static_cast<size_t>(t * S + s)];
            if (a == kLogZero || b == kLogZero) continue;
            const int64_t c = z[static_cast<size_t>(s)];
            occ[static_cast<size_t>(c)] = log_add(occ[static_cast<size_t>(c)], a + b - LP(t, s));
        }
        for (int64_t c = 0; c < C; ++c) {
            const double post = occ[static_cast<size_t>(c)] == kLogZero
                                    ? 0.0
                                    : std::exp(occ[static_cast<size_t>(c)] - log_p);
            (*grad)[static_cast<size_t>(t * C + c)] =
                std::exp(lp[static_cast<size_t>(t * C + c)]) - post;
        }
    }
    return ops::make_op_node({1}, {loss}, {logits}, [logits, grad](TensorImpl& self) mutable {
        if (!logits.needs_grad()) return;
        const double g = self.grad[0];
        auto& dst = logits.grad_mutable();
        for (size_t i = 0; i < grad->size(); ++i) dst[i] += g * (*grad)[i];
    });
}

Tensor ctc_loss(const std::vector<Tensor>& logits_per_item,
                const std::vector<std::vector<int64_t>>& targets, int64_t blank) {
    if (logits_per_item.empty()) throw ValueError("ctc: empty batch");
    if (logits_per_item.size() != targets.size())
        throw ValueError("ctc: logits/targets size mismatch");
    std::vector<Tensor> losses;
    losses.reserve(logits_per_item.size());
    for (size_t i = 0; i < logits_per_item.size(); ++i)
        losses.push_back(ctc_loss_single(logits_per_item[i], targets[i], blank));
    return ops::mean_all(ops::concat_dim0(losses));
}

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int64_t>& labels) {
    if (logits.ndim() != 2) throw ShapeError("cross_entropy: logits must be (B, classes)");
    const int64_t B = logits.dim(0), C = logits.dim(1);
    if (static_cast<int64_t>(labels.size()) != B)
        throw ValueError("cross_entropy: label count mismatch");
    for (int64_t b = 0; b < B; ++b)
        if (labels[static_cast<size_t>(b)] < 0 || labels[static_cast<size_t>(b)] >= C)
            throw ValueError("cross_entropy: label " + std::to_string(labels[static_cast<size_t>(b)]) +
                             " out of range [0, " + std::to_string(C) + ")");
    double loss = 0.0;
    auto soft = std::make_shared<std::vector<double>>(static_cast<size_t>(B * C));
    for (int64_t b = 0; b < B; ++b) {
        const double* row = logits.data().data() + b * C;
        double mx = row[0];
        for (int64_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int64_t c = 0; c < C; ++c) z += std::exp(row[c] - mx);
        const double lse = mx + std::log(z);
        for (int64_t c = 0; c < C; ++c)
            (*soft)[static_cast<size_t>(b * C + c)] = std::exp(row[c] - lse);
        loss += lse - row[labels[static_cast<size_t>(b)]];
    }
    loss /= static_cast<double>(B);
    auto labels_copy = std::make_shared<std::vector<int64_t>>(labels);
    return ops::make_op_node({1}, {loss}, {logits},
                             [logits, soft, labels_copy, B, C](TensorImpl& self) mutable {
                                 if (!logits.needs_grad()) return;
                                 const double g = self.grad[0] / static_cast<double>(B);
                                 auto& dst = logits.grad_mutable();
                                 for (int64_t b = 0; b < B; ++b)
                                     for (int64_t c = 0; c < C; ++c) {
                                         double v = (*soft)[static_cast<size_t>(b * C + c)];
                                         if (c == (*labels_copy)[static_cast<size_t>(b)]) v -= 1.0;
                                         dst[static_cast<size_t>(b * C + c)] += g * v;
                                     }
                             });
}

std::vector<int64_t> ctc_greedy_decode(const Tensor& logits, int64_t blank) {
    if (logits.ndim() != 2) throw ShapeError("ctc_greedy_decode: logits must be (T, C)");
    const int64_t T = logits.dim(0), C = logits.dim(1);
    std::vector<int64_t> out;
    int64_t prev = -1;
    for (int64_t t = 0; t < T; ++t) {
        const double* row = logits.data().data() + t * C;
        int64_t best = 0;
        for (int64_t c = 1; c < C; ++c)
            if (row[c] > row[best]) best = c;
        if (best != blank && best != prev) out.push_back(best);
        prev = best;
    }
    return out;
}

} // namespace scriptgen
