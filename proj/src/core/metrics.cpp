// SPDX-License-Identifier: Apache-2.0
#include "core/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace scriptgen {

GaussianStats feature_stats(const FeatureMatrix& f) {
    if (f.n < 1) throw ValueError("feature_stats: empty feature set");
    GaussianStats s;
    s.mean.assign(static_cast<size_t>(f.dim), 0.0);
    for (int64_t i = 0; i < f.n; ++i)
        for (int64_t j = 0; j < f.dim; ++j) s.mean[static_cast<size_t>(j)] += f.row(i)[j];
    for (double& v : s.mean) v /= static_cast<double>(f.n);
    s.cov.assign(static_cast<size_t>(f.dim * f.dim), 0.0);
    if (f.n > 1) {
        for (int64_t i = 0; i < f.n; ++i)
            for (int64_t a = 0; a < f.dim; ++a) {
                const double da = f.row(i)[a] - s.mean[static_cast<size_t>(a)];
                for (int64_t b = 0; b < f.dim; ++b)
                    s.cov[static_cast<size_t>(a * f.dim + b)] +=
                        da * (f.row(i)[b] - s.mean[static_cast<size_t>(b)]);
            }
        for (double& v : s.cov) v /= static_cast<double>(f.n - 1);
    }
    return s;
}

namespace {

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) ev[i] = ev[i] > 0 ? std::sqrt(ev[i]) : 0.0;
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace

double fid_from_stats(const GaussianStats& a, const GaussianStats& b, double eps) {
    const auto d = static_cast<int64_t>(a.mean.size());
    if (static_cast<int64_t>(b.mean.size()) != d)
        throw ShapeError("fid: feature dimension mismatch");
    double mean_term = 0.0;
    for (int64_t i = 0; i < d; ++i) {
        const double diff = a.mean[static_cast<size_t>(i)] - b.mean[static_cast<size_t>(i)];
        mean_term += diff * diff;
    }
    using Mat = Eigen::MatrixXd;
    Mat ca = Eigen::Map<const Mat>(a.cov.data(), d, d);
    Mat cb = Eigen::Map<const Mat>(b.cov.data(), d, d);
    // Near-singular covariances (negative eigenvalues from round-off or
    // rank deficiency) get a small ridge; well-conditioned inputs are left
    // untouched so closed-form cases match exactly.
    auto min_eig = [](const Mat& m) {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
        return es.eigenvalues().minCoeff();
    };
    if (min_eig(ca) < eps) ca.diagonal().array() += eps;
    if (min_eig(cb) < eps) cb.diagonal().array() += eps;
    // Tr((Ca Cb)^(1/2)) via the symmetric form (ra Cb ra)^(1/2).
    const Mat ra = sym_sqrt(ca);
    const Mat cross = sym_sqrt(ra * cb * ra);
    const double value = mean_term + ca.trace() + cb.trace() - 2.0 * cross.trace();
    return std::max(0.0, value);
}

double fid(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.dim != b.dim) throw ShapeError("fid: feature dimension mismatch");
    return fid_from_stats(feature_stats(a), feature_stats(b));
}

namespace {

double poly3(const double* x, const double* y, int64_t d) {
    double dot = 0.0;
    for (int64_t i = 0; i < d; ++i) dot += x[i] * y[i];
    const double v = dot / static_cast<double>(d) + 1.0;
    return v * v * v;
}

// Unbiased MMD^2 for equal subset sizes: all three sums exclude the
// paired diagonal (i == j), so identical sets cancel to exactly zero.
double mmd2_on_rows(const FeatureMatrix& a, const std::vector<int64_t>& ia,
                    const FeatureMatrix& b, const std::vector<int64_t>& ib) {
    const auto m = static_cast<int64_t>(ia.size());
    if (static_cast<int64_t>(ib.size()) != m)
        throw ValueError("kid: subset sizes must match");
    const int64_t d = a.dim;
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < m; ++j) {
            if (i == j) continue;
            kxx += poly3(a.row(ia[static_cast<size_t>(i)]), a.row(ia[static_cast<size_t>(j)]), d);
            kyy += poly3(b.row(ib[static_cast<size_t>(i)]), b.row(ib[static_cast<size_t>(j)]), d);
            kxy += poly3(a.row(ia[static_cast<size_t>(i)]), b.row(ib[static_cast<size_t>(j)]), d);
        }
    const double denom = static_cast<double>(m) * (m - 1);
    return (kxx + kyy - 2.0 * kxy) / denom;
}

std::vector<int64_t> sample_without_replacement(int64_t n, int64_t k, Rng& rng) {
    std::vector<int64_t> idx(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int64_t i = 0; i < k; ++i) {
        const auto j = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(n - i))) + i;
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(k));
    // Canonical order: the paired-diagonal exclusion then pairs rows by
    // set position rather than by draw order.
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace

double mmd2_unbiased_poly3(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.dim != b.dim) throw ShapeError("kid: feature dimension mismatch");
    if (a.n < 2 || b.n < 2) throw ValueError("kid: need at least 2 samples per side");
    std::vector<int64_t> ia(static_cast<size_t>(a.n)), ib(static_cast<size_t>(b.n));
    for (int64_t i = 0; i < a.n; ++i) ia[static_cast<size_t>(i)] = i;
    for (int64_t i = 0; i < b.n; ++i) ib[static_cast<size_t>(i)] = i;
    return mmd2_on_rows(a, ia, b, ib);
}

double kid(const FeatureMatrix& a, const FeatureMatrix& b, int64_t subset_size,
           int64_t num_subsets, uint64_t seed) {
    if (a.dim != b.dim) throw ShapeError("kid: feature dimension mismatch");
    if (subset_size < 2) throw ValueError("kid: subset_size must be >= 2");
    if (num_subsets < 1) throw ValueError("kid: num_subsets must be >= 1");
    const int64_t m = std::min(subset_size, std::min(a.n, b.n));
    if (m < 2) throw ValueError("kid: need at least 2 samples per side");
    Rng rng(mix_seed(seed, 0x1d));
    double acc = 0.0;
    for (int64_t s = 0; s < num_subsets; ++s) {
        const auto ia = sample_without_replacement(a.n, m, rng);
        const auto ib = sample_without_replacement(b.n, m, rng);
        acc += mmd2_on_rows(a, ia, b, ib);
    }
    return acc / static_cast<double>(num_subsets);
}

int64_t levenshtein(const std::string& a, const std::string& b) {
    const auto n = static_cast<int64_t>(a.size());
    const auto m = static_cast<int64_t>(b.size());
    std::vector<int64_t> prev(static_cast<size_t>(m + 1)), cur(static_cast<size_t>(m + 1));
    for (int64_t j = 0; j <= m; ++j) prev[static_cast<size_t>(j)] = j;
    for (int64_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (int64_t j = 1; j <= m; ++j) {
            const int64_t sub = prev[static_cast<size_t>(j - 1)] +
                                (a[static_cast<size_t>(i - 1)] == b[static_cast<size_t>(j - 1)] ? 0 : 1);
            cur[static_cast<size_t>(j)] =
                std::min({prev[static_cast<size_t>(j)] + 1, cur[static_cast<size_t>(j - 1)] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[static_cast<size_t>(m)];
}

double character_error_rate(const std::vector<CerPair>& pairs) {
    if (pairs.empty()) throw ValueError("character_error_rate: empty set");
    int64_t edits = 0, total = 0;
    for (const auto& p : pairs) {
        edits += levenshtein(p.decoded, p.target);
        total += static_cast<int64_t>(p.target.size());
    }
    if (total == 0) throw ValueError("character_error_rate: zero total target length");
    return static_cast<double>(edits) / static_cast<double>(total);
}

double delta_cer(const std::vector<CerPair>& generated, const std::vector<CerPair>& reference) {
    return std::abs(character_error_rate(generated) - character_error_rate(reference));
}

WcnFeatureExtractor::WcnFeatureExtractor(const WriterClassifier& wcn, int64_t dim)
    : wcn_(wcn), dim_(dim) {}

std::vector<double> WcnFeatureExtractor::extract(const ImageU8& image) const {
    NoGradGuard ng;
    Tensor f = wcn_.trunk_features(word_image_to_input(image));
    if (f.numel() != dim_) throw ShapeError("wcn extractor: unexpected feature dim");
    return f.data();
}

RandConvFeatureExtractor::RandConvFeatureExtractor(uint64_t seed) {
    Rng rng(mix_seed(seed, 0xfea7));
    c1_ = nn::Conv2d(reg_, "randconv.c1", 1, 8, 3, 3, 2, 2, 1, 1, rng);
    c2_ = nn::Conv2d(reg_, "randconv.c2", 8, 16, 3, 3, 2, 2, 1, 1, rng);
    c3_ = nn::Conv2d(reg_, "randconv.c3", 16, 32, 3, 3, 2, 2, 1, 1, rng);
    reg_.set_requires_grad(false);
}

int64_t RandConvFeatureExtractor::dim() const { return 32; }

std::vector<double> RandConvFeatureExtractor::extract(const ImageU8& image) const {
    NoGradGuard ng;
    Tensor x = word_image_to_input(image);
    x = ops::leaky_relu(c1_.forward(x), 0.2);
    x = ops::leaky_relu(c2_.forward(x), 0.2);
    x = ops::leaky_relu(c3_.forward(x), 0.2);
    return ops::global_mean_hw(x).data();
}

FeatureMatrix extract_features(const FeatureExtractor& ex, const std::vector<ImageU8>& images) {
    FeatureMatrix f;
    f.n = static_cast<int64_t>(images.size());
    f.dim = ex.dim();
    f.data.reserve(static_cast<size_t>(f.n * f.dim));
    for (const auto& img : images) {
        const auto v = ex.extract(img);
        f.data.insert(f.data.end(), v.begin(), v.end());
    }
    return f;
}

} // namespace scriptgen
