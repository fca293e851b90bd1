#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace infogap::gam {

using Columns = std::map<std::string, std::vector<double>>;

struct SmoothTermSpec {
    std::string covariate;
    std::size_t k = 4;  // basis dimension
};

struct GamConfig {
    double gamma = 1.0;
    double log_lambda_min = -15.0;
    double log_lambda_max = 20.0;
    std::size_t max_iterations = 200;
    double tolerance = 1e-8;  // relative change of the REML score between cycles

    void validate() const;  // throws ConfigError
};

// Cubic regression spline parameterized by its values at the knots.
struct CrBasis {
    Eigen::VectorXd knots;
    Eigen::MatrixXd F;  // knot values -> second derivatives at the knots
    Eigen::MatrixXd S;  // integrated squared second derivative penalty

    std::size_t k() const { return static_cast<std::size_t>(knots.size()); }
    // n x k; linear beyond the boundary knots.
    Eigen::MatrixXd evaluate(std::span<const double> x) const;
};

// Knots at evenly spaced quantiles of the distinct values.
Eigen::VectorXd place_knots(std::span<const double> x, std::size_t k);
CrBasis cr_basis(const Eigen::VectorXd& knots);

// Basis with the sum-to-zero constraint absorbed and the penalty rescaled to
// the design's magnitude.
struct SmoothTerm {
    std::string name;
    CrBasis basis;
    Eigen::MatrixXd Z;  // k x (k-1) constraint null space
    Eigen::MatrixXd X;  // n x (k-1)
    Eigen::MatrixXd S;  // (k-1) x (k-1)
    double penalty_scale = 1.0;
    std::size_t penalty_rank = 0;
};

// Reduces k with a warning when x has fewer than k distinct values.
SmoothTerm build_smooth(std::span<const double> x, const SmoothTermSpec& spec);

struct GamModel {
    std::vector<std::string> terms;
    Eigen::VectorXd coefficients;  // intercept, then k-1 per term
    std::vector<double> lambda;
    std::vector<double> edf;  // per term
    double edf_total = 0;     // includes the intercept
    Eigen::VectorXd fitted;
    double deviance = 0;
    double null_deviance = 0;
    double deviance_explained = 0;
    double r2_adj = 0;
    double scale = 0;  // deviance / (n - edf_total)
    double reml = 0;
    std::size_t n = 0;
    std::size_t iterations = 0;
};

// Design and penalties for a fixed set of covariates; refit for any y.
class GamProblem {
public:
    GamProblem(const Columns& data, const std::vector<SmoothTermSpec>& terms, const GamConfig& cfg = {});

    GamModel fit(std::span<const double> y) const;
    GamModel fit_fixed(std::span<const double> y, std::span<const double> log_lambda) const;
    // Profiled REML score at the given log smoothing parameters.
    double reml_score(std::span<const double> y, std::span<const double> log_lambda) const;

    std::size_t n() const { return n_; }
    std::size_t n_coefficients() const { return static_cast<std::size_t>(X_.cols()); }
    const std::vector<SmoothTerm>& terms() const { return terms_; }

private:
    struct Moments;
    struct Factor;
    Factor factor(std::span<const double> rho) const;
    Moments moments(std::span<const double> y) const;
    double score(const Moments& m, std::span<const double> rho) const;
    GamModel assemble(std::span<const double> y, std::span<const double> rho, double reml, std::size_t iterations) const;

    GamConfig cfg_;
    std::size_t n_ = 0;
    std::vector<SmoothTerm> terms_;
    std::vector<Eigen::Index> offsets_;
    Eigen::MatrixXd X_;
    Eigen::MatrixXd Xe_;                      // X with each block in its penalty eigenbasis
    Eigen::VectorXd eigenvalues_;             // penalty eigenvalue per rotated column
    std::vector<Eigen::MatrixXd> rotations_;  // per-term eigenvectors
    std::size_t null_space_dim_ = 1;
};

GamModel fit_gam(std::span<const double> y, const Columns& data, const std::vector<SmoothTermSpec>& terms,
                 const GamConfig& cfg = {});

struct PermutationResult {
    double p_deviance_explained = 1;
    double p_r2_adj = 1;
    std::size_t n_perm = 0;
};

// Seeds are derived per permutation from seed, so results do not depend on
// the worker count.
PermutationResult permutation_test(std::span<const double> y, const Columns& data,
                                   const std::vector<SmoothTermSpec>& terms, const GamConfig& cfg,
                                   std::size_t n_perm, std::uint64_t seed, std::size_t workers = 1);

struct ModelComparison {
    double chi2 = 0;
    double df = 0;
    double p_value = 1;
};

// Throws DomainError unless null's terms are a subset of full's.
ModelComparison compare_models(const GamModel& null_model, const GamModel& full_model);

// Upper tail of the chi-square distribution with fractional df.
double chi_square_upper(double x, double df);

}  // namespace infogap::gam
