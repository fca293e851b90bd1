#include "infogap/gam.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "infogap/error.hpp"
#include "infogap/log.hpp"
#include "infogap/rng.hpp"
#include "infogap/util.hpp"

namespace infogap::gam {

void GamConfig::validate() const {
    if (!(gamma >= 1.0)) throw ConfigError("gamma must be >= 1");
    if (!(log_lambda_min < log_lambda_max)) throw ConfigError("log_lambda_min must be below log_lambda_max");
    if (max_iterations == 0) throw ConfigError("max_iterations must be positive");
}

// ---- basis ----------------------------------------------------------------------

Eigen::VectorXd place_knots(std::span<const double> x, std::size_t k) {
    std::vector<double> u(x.begin(), x.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    const std::size_t n = u.size();
    if (k < 2 || k > n)
        throw DomainError("cannot place " + std::to_string(k) + " knots on " + std::to_string(n) + " distinct values");
    Eigen::VectorXd knots(static_cast<Eigen::Index>(k));
    knots(0) = u.front();
    knots(static_cast<Eigen::Index>(k - 1)) = u.back();
    const double delta = static_cast<double>(n - 1) / static_cast<double>(k - 1);
    for (std::size_t i = 1; i + 1 < k; ++i) {
        const double position = delta * static_cast<double>(i);
        const auto lo = static_cast<std::size_t>(std::floor(position));
        const double frac = position - static_cast<double>(lo);
        knots(static_cast<Eigen::Index>(i)) = u[lo] * (1 - frac) + u[std::min(lo + 1, n - 1)] * frac;
    }
    return knots;
}

CrBasis cr_basis(const Eigen::VectorXd& knots) {
    const Eigen::Index k = knots.size();
    if (k < 3) throw DomainError("a cubic regression spline needs at least 3 knots");
    Eigen::VectorXd h(k - 1);
    for (Eigen::Index j = 0; j + 1 < k; ++j) {
        h(j) = knots(j + 1) - knots(j);
        if (!(h(j) > 0)) throw DomainError("knots must be strictly increasing");
    }
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(k - 2, k);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(k - 2, k - 2);
    for (Eigen::Index i = 0; i < k - 2; ++i) {
        D(i, i) = 1.0 / h(i);
        D(i, i + 1) = -1.0 / h(i) - 1.0 / h(i + 1);
        D(i, i + 2) = 1.0 / h(i + 1);
        B(i, i) = (h(i) + h(i + 1)) / 3.0;
        if (i + 1 < k - 2) B(i, i + 1) = B(i + 1, i) = h(i + 1) / 6.0;
    }
    Eigen::MatrixXd BinvD = B.ldlt().solve(D);
    CrBasis basis;
    basis.knots = knots;
    basis.F = Eigen::MatrixXd::Zero(k, k);
    basis.F.middleRows(1, k - 2) = BinvD;
    basis.S = D.transpose() * BinvD;
    basis.S = 0.5 * (basis.S + basis.S.transpose());
    return basis;
}

Eigen::MatrixXd CrBasis::evaluate(std::span<const double> x) const {
    const Eigen::Index k = knots.size();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), k);
    for (std::size_t r = 0; r < x.size(); ++r) {
        const double v = x[r];
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(k);
        if (v < knots(0) || v > knots(k - 1)) {
            // Linear continuation using the boundary slope.
            const bool left = v < knots(0);
            const Eigen::Index j = left ? 0 : k - 2;
            const double hj = knots(j + 1) - knots(j);
            Eigen::RowVectorXd slope = Eigen::RowVectorXd::Zero(k);
            slope(j) -= 1.0 / hj;
            slope(j + 1) += 1.0 / hj;
            if (left)
                slope -= hj / 6.0 * (2.0 * F.row(j) + F.row(j + 1));
            else
                slope += hj / 6.0 * (F.row(j) + 2.0 * F.row(j + 1));
            const Eigen::Index anchor = left ? 0 : k - 1;
            row(anchor) = 1.0;
            row += (v - knots(anchor)) * slope;
        } else {
            Eigen::Index j = 0;
            while (j < k - 2 && v > knots(j + 1)) ++j;
            const double hj = knots(j + 1) - knots(j);
            const double am = (knots(j + 1) - v) / hj, ap = (v - knots(j)) / hj;
            const double cm = ((knots(j + 1) - v) * (knots(j + 1) - v) * (knots(j + 1) - v) / hj -
                               hj * (knots(j + 1) - v)) / 6.0;
            const double cp = ((v - knots(j)) * (v - knots(j)) * (v - knots(j)) / hj - hj * (v - knots(j))) / 6.0;
            row(j) += am;
            row(j + 1) += ap;
            row += cm * F.row(j) + cp * F.row(j + 1);
        }
        out.row(static_cast<Eigen::Index>(r)) = row;
    }
    return out;
}

SmoothTerm build_smooth(std::span<const double> x, const SmoothTermSpec& spec) {
    if (spec.k < 3) throw ConfigError("basis dimension k must be >= 3 for '" + spec.covariate + "'");
    for (double v : x)
        if (!std::isfinite(v)) throw DomainError("covariate '" + spec.covariate + "' has non-finite values");
    std::set<double> distinct(x.begin(), x.end());
    std::size_t k = spec.k;
    if (distinct.size() < k) {
        if (distinct.size() < 3)
            throw DomainError("covariate '" + spec.covariate + "' has fewer than 3 distinct values");
        log::warn("covariate '" + spec.covariate + "' has " + std::to_string(distinct.size()) +
                  " distinct values; basis dimension reduced from " + std::to_string(k));
        k = distinct.size();
    }

    SmoothTerm term;
    term.name = spec.covariate;
    term.basis = cr_basis(place_knots(x, k));
    Eigen::MatrixXd X = term.basis.evaluate(x);

    // Null space of the column sums via a full QR of C^T.
    Eigen::MatrixXd Ct = X.colwise().sum().transpose();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Ct);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(Ct.rows(), Ct.rows());
    term.Z = Q.rightCols(Ct.rows() - 1);
    term.X = X * term.Z;
    term.S = term.Z.transpose() * term.basis.S * term.Z;

    // Bring the penalty to the scale of X'X so smoothing parameters are comparable.
    const double x_inf = term.X.cwiseAbs().rowwise().sum().maxCoeff();
    const double s_one = term.S.cwiseAbs().colwise().sum().maxCoeff();
    term.penalty_scale = s_one > 0 ? s_one / (x_inf * x_inf) : 1.0;
    term.S /= term.penalty_scale;
    term.S = 0.5 * (term.S + term.S.transpose());
    term.penalty_rank = k - 2;
    return term;
}

// ---- fitting ----------------------------------------------------------------------

struct GamProblem::Moments {
    Eigen::VectorXd y;
    double yty = 0;
    double tss = 0;
    double floor = 0;
};

GamProblem::GamProblem(const Columns& data, const std::vector<SmoothTermSpec>& terms, const GamConfig& cfg)
    : cfg_(cfg) {
    cfg_.validate();
    std::set<std::string> names;
    for (const auto& spec : terms) {
        auto it = data.find(spec.covariate);
        if (it == data.end()) throw InputError("no data for covariate '" + spec.covariate + "'");
        if (!names.insert(spec.covariate).second) throw ConfigError("duplicate smooth '" + spec.covariate + "'");
        if (terms_.empty()) n_ = it->second.size();
        if (it->second.size() != n_) throw InputError("covariate '" + spec.covariate + "' has a different length");
        terms_.push_back(build_smooth(it->second, spec));
    }
    if (terms_.empty()) throw ConfigError("a model needs at least one smooth term");

    Eigen::Index p = 1;
    for (const auto& t : terms_) {
        offsets_.push_back(p);
        p += t.X.cols();
    }
    // Penalty null space: intercept plus one linear direction per smooth.
    null_space_dim_ = 1 + terms_.size();
    if (n_ <= null_space_dim_)
        throw DomainError("model needs more than " + std::to_string(null_space_dim_) + " rows, data has " +
                          std::to_string(n_));
    X_.resize(static_cast<Eigen::Index>(n_), p);
    X_.col(0).setOnes();
    for (std::size_t j = 0; j < terms_.size(); ++j) X_.middleCols(offsets_[j], terms_[j].X.cols()) = terms_[j].X;

    // Rotate each block onto the eigenvectors of its penalty so the penalty is diagonal.
    Xe_ = X_;
    eigenvalues_ = Eigen::VectorXd::Zero(p);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(terms_[j].S);
        const Eigen::Index q = terms_[j].S.cols();
        rotations_.push_back(eig.eigenvectors());
        Xe_.middleCols(offsets_[j], q) = terms_[j].X * eig.eigenvectors();
        // Eigenvalues come sorted ascending; the null space is known exactly.
        Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
        ev.head(q - static_cast<Eigen::Index>(terms_[j].penalty_rank)).setZero();
        eigenvalues_.segment(offsets_[j], q) = ev;
    }
}

GamProblem::Moments GamProblem::moments(std::span<const double> y) const {
    if (y.size() != n_) throw InputError("response has " + std::to_string(y.size()) + " rows, covariates " +
                                         std::to_string(n_));
    Moments m;
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    if (!yv.allFinite()) throw DomainError("response has non-finite values");
    m.y = yv;
    m.yty = yv.squaredNorm();
    const double mean = yv.mean();
    m.tss = (yv.array() - mean).square().sum();
    m.floor = std::max(1e-14 * m.tss, 1e-280);
    return m;
}

// Penalized least squares as ordinary least squares on [X; sqrt(S_lambda)] in
// the penalty eigenbasis. Column i is scaled by 1/sqrt(1 + lambda s_i) so that
// huge smoothing parameters do not swamp the factorization.
struct GamProblem::Factor {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    Eigen::VectorXd column_scale;
    double log_det = 0;  // log |X'X + S_lambda|
};

GamProblem::Factor GamProblem::factor(std::span<const double> rho) const {
    const Eigen::Index n = X_.rows(), p = X_.cols();
    Eigen::VectorXd penalty = Eigen::VectorXd::Zero(p);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        const Eigen::Index q = terms_[j].S.cols();
        penalty.segment(offsets_[j], q) = std::exp(rho[j]) * eigenvalues_.segment(offsets_[j], q);
    }
    const Eigen::VectorXd c = (1.0 + penalty.array()).rsqrt().matrix();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + p, p);
    M.topRows(n) = Xe_ * c.asDiagonal();
    M.bottomRows(p).diagonal() = penalty.cwiseSqrt().cwiseProduct(c);
    Factor f{Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(M), c, 0.0};
    const Eigen::VectorXd diag = f.qr.matrixQR().diagonal().cwiseAbs();
    const double tiny = std::max(diag.maxCoeff() * 1e-15, 1e-300);
    for (Eigen::Index i = 0; i < p; ++i) f.log_det += 2.0 * std::log(std::max(diag(i), tiny));
    f.log_det += penalty.array().log1p().sum();
    return f;
}

double GamProblem::score(const Moments& m, std::span<const double> rho) const {
    const Factor f = factor(rho);
    const Eigen::Index n = X_.rows(), p = X_.cols();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + p);
    b.head(n) = m.y;
    // D_p is the squared norm of the part of b outside the column space.
    const Eigen::VectorXd qtb = f.qr.householderQ().transpose() * b;
    const double dp = std::max(qtb.tail(n).squaredNorm(), m.floor);
    double log_det_s = 0;
    for (std::size_t j = 0; j < terms_.size(); ++j)
        log_det_s += static_cast<double>(terms_[j].penalty_rank) * rho[j];
    const double residual_df = static_cast<double>(n_ - null_space_dim_);
    return residual_df * std::log(dp) + cfg_.gamma * (f.log_det - log_det_s);
}

double GamProblem::reml_score(std::span<const double> y, std::span<const double> log_lambda) const {
    if (log_lambda.size() != terms_.size()) throw DomainError("one smoothing parameter per term expected");
    return score(moments(y), log_lambda);
}

namespace {

// Golden-section minimum of f on [a, b].
template <typename F>
std::pair<double, double> golden(F&& f, double a, double b, double tol) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return fc <= fd ? std::pair{c, fc} : std::pair{d, fd};
}

}  // namespace

GamModel GamProblem::fit(std::span<const double> y) const {
    const Moments m = moments(y);
    const std::size_t q = terms_.size();
    const double lo = cfg_.log_lambda_min, hi = cfg_.log_lambda_max;
    std::vector<double> rho(q, 0.0);
    double current = score(m, rho);
    auto f = [&](const std::vector<double>& r) { return score(m, r); };

    // Starting point: one coordinate pass with a unit grid refined by golden section.
    for (std::size_t j = 0; j < q; ++j) {
        std::vector<double> trial = rho;
        auto fj = [&](double t) {
            trial[j] = t;
            return f(trial);
        };
        double start = rho[j], best = current;
        for (double t = lo; t <= hi + 1e-12; t += 1.0) {
            double v = fj(t);
            if (v < best) {
                best = v;
                start = t;
            }
        }
        auto [t, v] = golden(fj, std::max(lo, start - 1.0), std::min(hi, start + 1.0), 1e-5);
        if (v < best) {
            start = t;
            best = v;
        }
        rho[j] = start;
        current = best;
    }

    // Projected Newton refinement with finite-difference derivatives.
    std::ostringstream trace;
    trace << "start: score " << util::format_double(current) << "\n";
    const double h = 1e-4;
    const double grad_tol = 1e-6 * (1.0 + std::abs(current));
    std::size_t iter = 0;
    bool converged = false;
    for (; iter < cfg_.max_iterations && !converged; ++iter) {
        Eigen::VectorXd g(static_cast<Eigen::Index>(q));
        Eigen::MatrixXd H(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
        std::vector<double> r = rho;
        for (std::size_t a = 0; a < q; ++a) {
            r[a] = rho[a] + h;
            const double fp = f(r);
            r[a] = rho[a] - h;
            const double fm = f(r);
            r[a] = rho[a];
            g(static_cast<Eigen::Index>(a)) = (fp - fm) / (2 * h);
            H(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = (fp - 2 * current + fm) / (h * h);
            for (std::size_t b = 0; b < a; ++b) {
                double corner[4];
                int idx = 0;
                for (double sa : {1.0, -1.0})
                    for (double sb : {1.0, -1.0}) {
                        r[a] = rho[a] + sa * h;
                        r[b] = rho[b] + sb * h;
                        corner[idx++] = f(r);
                    }
                r[a] = rho[a];
                r[b] = rho[b];
                const double v = (corner[0] - corner[1] - corner[2] + corner[3]) / (4 * h * h);
                H(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
                H(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
            }
        }
        std::vector<Eigen::Index> free;
        double pg = 0;
        for (std::size_t a = 0; a < q; ++a) {
            const double ga = g(static_cast<Eigen::Index>(a));
            const bool pinned = (rho[a] <= lo + 1e-9 && ga > 0) || (rho[a] >= hi - 1e-9 && ga < 0);
            if (pinned) continue;
            free.push_back(static_cast<Eigen::Index>(a));
            pg = std::max(pg, std::abs(ga));
        }
        trace << "iteration " << iter + 1 << ": score " << util::format_double(current) << " gradient "
              << util::format_double(pg) << " log lambda";
        for (double r : rho) trace << ' ' << util::format_double(r);
        trace << "\n";
        if (pg <= grad_tol) {
            converged = true;
            break;
        }
        const auto nf = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd Hf(nf, nf);
        Eigen::VectorXd gf(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
            gf(a) = g(free[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < nf; ++b)
                Hf(a, b) = H(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Hf);
        Eigen::VectorXd ev = eig.eigenvalues().cwiseAbs();
        const double ev_floor = std::max(1e-6 * ev.maxCoeff(), 1e-8);
        ev = ev.unaryExpr([&](double v) { return std::max(v, ev_floor); });
        Eigen::VectorXd d = -(eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose() * gf);
        if (d.dot(gf) >= 0) d = -gf;
        const double longest = d.cwiseAbs().maxCoeff();
        if (longest > 5.0) d *= 5.0 / longest;

        bool moved = false;
        for (double step = 1.0; step > 1e-6 && !moved; step /= 2) {
            std::vector<double> trial = rho;
            for (Eigen::Index a = 0; a < nf; ++a) {
                auto& t = trial[static_cast<std::size_t>(free[static_cast<std::size_t>(a)])];
                t = std::clamp(t + step * d(a), lo, hi);
            }
            const double v = f(trial);
            if (v < current) {
                const double gain = current - v;
                double max_step = 0;
                for (std::size_t a = 0; a < q; ++a) max_step = std::max(max_step, std::abs(trial[a] - rho[a]));
                rho = trial;
                current = v;
                moved = true;
                if (gain <= cfg_.tolerance * (1.0 + std::abs(current)) && max_step < 1e-3) converged = true;
            }
        }
        // No descent along the Newton or gradient direction: numerically stationary.
        if (!moved) converged = true;
    }
    if (!converged)
        throw ConvergenceError("REML smoothing selection did not converge in " + std::to_string(cfg_.max_iterations) +
                               " iterations\n" + trace.str());
    return assemble(y, rho, current, iter);
}

GamModel GamProblem::fit_fixed(std::span<const double> y, std::span<const double> log_lambda) const {
    if (log_lambda.size() != terms_.size()) throw DomainError("one smoothing parameter per term expected");
    return assemble(y, log_lambda, reml_score(y, log_lambda), 0);
}

GamModel GamProblem::assemble(std::span<const double> y, std::span<const double> rho, double reml,
                              std::size_t iterations) const {
    const Moments m = moments(y);
    GamModel model;
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        model.terms.push_back(terms_[j].name);
        model.lambda.push_back(std::exp(rho[j]));
    }
    const Factor f = factor(rho);
    const Eigen::Index n = X_.rows(), p = X_.cols();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + p);
    b.head(n) = m.y;
    const Eigen::VectorXd gamma = f.column_scale.cwiseProduct(f.qr.solve(b));
    model.coefficients = gamma;
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        const Eigen::Index q = terms_[j].S.cols();
        model.coefficients.segment(offsets_[j], q) = rotations_[j] * gamma.segment(offsets_[j], q);
    }
    model.n = n_;
    model.fitted = X_ * model.coefficients;
    model.deviance = (m.y - model.fitted).squaredNorm();
    model.null_deviance = m.tss;
    const double tiny = 1e-20 * std::max(1.0, m.yty);
    model.deviance_explained = model.null_deviance > tiny ? 1.0 - model.deviance / model.null_deviance : 0.0;
    model.deviance_explained = std::clamp(model.deviance_explained, 0.0, 1.0);

    // With M P = Q R and Q1 the first n rows of Q, the influence matrix
    // (X'X + S)^-1 X'X is similar to R^-1 Q1'Q1 R; rotations within a block
    // and column scaling leave the per-term traces unchanged.
    const Eigen::MatrixXd Q = f.qr.householderQ() * Eigen::MatrixXd::Identity(n + p, p);
    const Eigen::MatrixXd R = f.qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd W = Q.topRows(n).transpose() * Q.topRows(n);
    const Eigen::MatrixXd G = R.triangularView<Eigen::Upper>().solve(W * R);
    Eigen::VectorXd edf(p);
    const auto& perm = f.qr.colsPermutation().indices();
    for (Eigen::Index k = 0; k < p; ++k) edf(perm(k)) = G(k, k);
    model.edf_total = edf.sum();
    for (std::size_t j = 0; j < terms_.size(); ++j)
        model.edf.push_back(edf.segment(offsets_[j], terms_[j].S.cols()).sum());

    const double nd = static_cast<double>(n_);
    const double residual_df = nd - model.edf_total;
    model.scale = residual_df > 0 ? model.deviance / residual_df : std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd resid = m.y - model.fitted;
    const double var_resid = (resid.array() - resid.mean()).square().sum() / (nd - 1);
    const double var_y = m.tss / (nd - 1);
    model.r2_adj = var_y > tiny && residual_df > 0 ? 1.0 - var_resid * (nd - 1) / (var_y * residual_df) : 0.0;
    model.reml = reml;
    model.iterations = iterations;
    return model;
}

GamModel fit_gam(std::span<const double> y, const Columns& data, const std::vector<SmoothTermSpec>& terms,
                 const GamConfig& cfg) {
    return GamProblem(data, terms, cfg).fit(y);
}

PermutationResult permutation_test(std::span<const double> y, const Columns& data,
                                   const std::vector<SmoothTermSpec>& terms, const GamConfig& cfg, std::size_t n_perm,
                                   std::uint64_t seed, std::size_t workers) {
    if (n_perm < 100) throw ConfigError("permutation test needs at least 100 permutations");
    const GamProblem problem(data, terms, cfg);
    const GamModel observed = problem.fit(y);

    std::vector<char> dev_hit(n_perm, 0), r2_hit(n_perm, 0);
    std::vector<std::exception_ptr> failures(n_perm);
    auto run = [&](std::size_t first, std::size_t stride) {
        std::vector<double> shuffled(y.begin(), y.end());
        for (std::size_t i = first; i < n_perm; i += stride) {
            try {
                std::copy(y.begin(), y.end(), shuffled.begin());
                Rng rng(Rng::derive(seed, i));
                rng.shuffle(std::span<double>(shuffled));
                GamModel m = problem.fit(shuffled);
                dev_hit[i] = m.deviance_explained >= observed.deviance_explained;
                r2_hit[i] = m.r2_adj >= observed.r2_adj;
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, n_perm));
    if (workers == 1) {
        run(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
        for (auto& t : pool) t.join();
    }
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);

    PermutationResult result;
    result.n_perm = n_perm;
    const double denominator = 1.0 + static_cast<double>(n_perm);
    result.p_deviance_explained = (1.0 + static_cast<double>(std::count(dev_hit.begin(), dev_hit.end(), 1))) / denominator;
    result.p_r2_adj = (1.0 + static_cast<double>(std::count(r2_hit.begin(), r2_hit.end(), 1))) / denominator;
    return result;
}

double chi_square_upper(double x, double df) {
    if (!(df > 0)) throw DomainError("chi-square needs df > 0");
    if (x <= 0) return 1.0;
    return boost::math::gamma_q(df / 2.0, x / 2.0);
}

ModelComparison compare_models(const GamModel& null_model, const GamModel& full_model) {
    std::set<std::string> full(full_model.terms.begin(), full_model.terms.end());
    for (const auto& t : null_model.terms)
        if (!full.count(t)) throw DomainError("models are not nested: '" + t + "' is missing from the full model");
    if (null_model.n != full_model.n) throw DomainError("models were fitted to different numbers of rows");
    ModelComparison c;
    c.df = full_model.edf_total - null_model.edf_total;
    if (!(full_model.scale > 0)) throw DomainError("full model has no residual degrees of freedom");
    c.chi2 = (null_model.deviance - full_model.deviance) / full_model.scale;
    if (c.df <= 1e-9 || c.chi2 <= 0) {
        c.chi2 = std::max(c.chi2, 0.0);
        c.p_value = 1.0;
        return c;
    }
    c.p_value = chi_square_upper(c.chi2, c.df);
    return c;
}

}  // namespace infogap::gam
