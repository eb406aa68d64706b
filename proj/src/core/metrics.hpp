// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/critics.hpp"
#include "core/image.hpp"

namespace scriptgen {

// Row-major feature matrix (n rows, dim columns).
struct FeatureMatrix {
    int64_t n{0};
    int64_t dim{0};
    std::vector<double> data;
    const double* row(int64_t i) const { return data.data() + i * dim; }
};

struct GaussianStats {
    std::vector<double> mean;
    std::vector<double> cov; // dim x dim row-major, sample covariance (ddof 1)
};

GaussianStats feature_stats(const FeatureMatrix& f);

// Frechet distance between Gaussians:
// |mu_a - mu_b|^2 + Tr(Ca + Cb - 2 (Ca Cb)^(1/2)), computed through the
// symmetrized square root with negative eigenvalues clamped.
double fid_from_stats(const GaussianStats& a, const GaussianStats& b, double eps = 1e-10);
double fid(const FeatureMatrix& a, const FeatureMatrix& b);

// Unbiased MMD^2 with the polynomial kernel (x.y/d + 1)^3, averaged over
// seeded subsets sampled without replacement.
double kid(const FeatureMatrix& a, const FeatureMatrix& b, int64_t subset_size,
           int64_t num_subsets, uint64_t seed);
// Single-subset unbiased estimator over full feature sets (test oracle
// surface).
double mmd2_unbiased_poly3(const FeatureMatrix& a, const FeatureMatrix& b);

int64_t levenshtein(const std::string& a, const std::string& b);

struct CerPair {
    std::string decoded;
    std::string target;
};
double character_error_rate(const std::vector<CerPair>& pairs);
double delta_cer(const std::vector<CerPair>& generated, const std::vector<CerPair>& reference);

// Pluggable image feature extractor for FID/KID.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string name() const = 0;
    virtual int64_t dim() const = 0;
    virtual std::vector<double> extract(const ImageU8& image) const = 0;
};

// Pooled trunk features of the trained writer classifier.
class WcnFeatureExtractor : public FeatureExtractor {
public:
    WcnFeatureExtractor(const WriterClassifier& wcn, int64_t dim);
    std::string name() const override { return "wcn"; }
    int64_t dim() const override { return dim_; }
    std::vector<double> extract(const ImageU8& image) const override;

private:
    const WriterClassifier& wcn_;
    int64_t dim_;
};

// Fixed-seed random convolutional projector; checkpoint-independent, used
// for pure pipeline tests.
class RandConvFeatureExtractor : public FeatureExtractor {
public:
    explicit RandConvFeatureExtractor(uint64_t seed = 0x9c0ffee);
    std::string name() const override { return "randconv"; }
    int64_t dim() const override;
    std::vector<double> extract(const ImageU8& image) const override;

private:
    nn::ParamRegistry reg_;
    nn::Conv2d c1_, c2_, c3_;
};

FeatureMatrix extract_features(const FeatureExtractor& ex, const std::vector<ImageU8>& images);

struct MetricReport {
    double fid{0};
    double kid{0};
    double kid_x1000{0};
    double delta_cer{0};
    double cer_generated{0};
    double cer_reference{0};
    int64_t generated_count{0};
    int64_t reference_count{0};
    std::string extractor;
    std::string recognizer;
};

} // namespace scriptgen
