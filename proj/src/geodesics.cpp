#include "wsub/geodesics.hpp"

#include "wsub/errors.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <chrono>
#include <functional>
#include <cmath>
#include <limits>

namespace wsub {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;
using Eigen::Index;
using Eigen::VectorXd;

// Index bookkeeping for the staggered grid. Cells are flattened as c = i * n1 + j.
struct Layout {
    int dim = 1;
    Index n0 = 0, n1 = 1, N = 0, T = 0;
    double dx0 = 1.0, dx1 = 1.0, dt = 1.0, cellvol = 1.0;

    Index nrho() const { return (T - 1) * N; }
    Index nm0() const { return T * (n0 - 1) * n1; }
    Index nm1() const { return dim == 2 ? T * n0 * (n1 - 1) : 0; }
    Index nU() const { return nrho() + nm0() + nm1(); }
    Index nV() const { return T * N * (1 + dim); }

    Index rho(Index k, Index c) const { return (k - 1) * N + c; }
    Index m0(Index k, Index i, Index j) const { return nrho() + (k * (n0 - 1) + i) * n1 + j; }
    Index m1(Index k, Index i, Index j) const { return nrho() + nm0() + (k * n0 + i) * (n1 - 1) + j; }
    Index va(Index k, Index c) const { return k * N + c; }
    Index vb(int axis, Index k, Index c) const { return (1 + axis) * T * N + k * N + c; }
};

struct Problem {
    Layout L;
    SpMat K;           // U -> centered (a, b) grid
    VectorXd v0;       // endpoint contribution to K U + v0
    SpMat A;           // row-normalized constraints (continuity minus one row, then slice rows)
    VectorXd b;
    VectorXd row_scale;  // A_unscaled = diag(row_scale) A
    Index n_cont = 0;    // continuity rows kept
    Index n_slice = 0;   // independent constraint rows per interior slice
    Eigen::MatrixXd slice_rows;  // n_slice x N, coefficients on masses
    VectorXd slice_targets;
    Eigen::SimplicialLDLT<SpMat> chol;
    VectorXd rho_i, rho_f;       // endpoint densities
};

// Per-slice linear constraints as rows on cell masses, with the redundant ones
// removed: a row is kept only if it is independent of the unit-mass row and of
// the rows kept before it (marginal histograms share their total, for instance).
void slice_constraints(const ConstraintSet& cs, const Axis& a0, const Axis& a1, int dim,
                       Eigen::MatrixXd& rows, VectorXd& targets) {
    const Index n0 = a0.n, n1 = dim == 2 ? a1.n : 1, N = n0 * n1;
    std::vector<VectorXd> cand;
    std::vector<double> cand_t;
    for (const auto& p : cs.polynomials) {
        VectorXd r(N);
        for (Index i = 0; i < n0; ++i)
            for (Index j = 0; j < n1; ++j)
                r[i * n1 + j] = dim == 2 ? p(a0.center(i), a1.center(j)) : p(a0.center(i));
        cand.push_back(r);
        cand_t.push_back(p.target);
    }
    for (const auto& m : cs.marginals) {
        const Index len = m.axis == 0 ? n0 : n1;
        if (m.marginal.size() != len) throw DomainError("marginal histogram length differs from grid");
        for (Index q = 0; q < len; ++q) {
            VectorXd r = VectorXd::Zero(N);
            for (Index i = 0; i < n0; ++i)
                for (Index j = 0; j < n1; ++j)
                    if ((m.axis == 0 ? i : j) == q) r[i * n1 + j] = 1.0;
            cand.push_back(r);
            cand_t.push_back(m.marginal[q]);
        }
    }
    std::vector<VectorXd> basis{VectorXd::Ones(N) / std::sqrt(static_cast<double>(N))};
    std::vector<Index> keep;
    for (std::size_t k = 0; k < cand.size(); ++k) {
        VectorXd r = cand[k];
        const double nrm = r.norm();
        if (nrm == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) r -= q.dot(r) * q;
        if (r.norm() > 1e-9 * nrm) {
            basis.push_back(r / r.norm());
            keep.push_back(static_cast<Index>(k));
        }
    }
    rows.resize(static_cast<Index>(keep.size()), N);
    targets.resize(static_cast<Index>(keep.size()));
    for (std::size_t q = 0; q < keep.size(); ++q) {
        rows.row(static_cast<Index>(q)) = cand[static_cast<std::size_t>(keep[q])].transpose();
        targets[static_cast<Index>(q)] = cand_t[static_cast<std::size_t>(keep[q])];
    }
}

void build(Problem& P, const VectorXd& mass_i, const VectorXd& mass_f, const ConstraintSet& cs, const Axis& a0,
           const Axis& a1) {
    Layout& L = P.L;
    P.rho_i = mass_i / L.cellvol;
    P.rho_f = mass_f / L.cellvol;

    // K and v0.
    std::vector<Trip> kt;
    P.v0 = VectorXd::Zero(L.nV());
    for (Index k = 0; k < L.T; ++k) {
        for (Index i = 0; i < L.n0; ++i) {
            for (Index j = 0; j < L.n1; ++j) {
                const Index c = i * L.n1 + j;
                const Index ra = L.va(k, c);
                if (k >= 1) kt.emplace_back(ra, L.rho(k, c), 0.5);
                else P.v0[ra] += 0.5 * P.rho_i[c];
                if (k + 1 <= L.T - 1) kt.emplace_back(ra, L.rho(k + 1, c), 0.5);
                else P.v0[ra] += 0.5 * P.rho_f[c];
                const Index rb0 = L.vb(0, k, c);
                if (i >= 1) kt.emplace_back(rb0, L.m0(k, i - 1, j), 0.5);
                if (i + 1 < L.n0) kt.emplace_back(rb0, L.m0(k, i, j), 0.5);
                if (L.dim == 2) {
                    const Index rb1 = L.vb(1, k, c);
                    if (j >= 1) kt.emplace_back(rb1, L.m1(k, i, j - 1), 0.5);
                    if (j + 1 < L.n1) kt.emplace_back(rb1, L.m1(k, i, j), 0.5);
                }
            }
        }
    }
    P.K.resize(L.nV(), L.nU());
    P.K.setFromTriplets(kt.begin(), kt.end());

    slice_constraints(cs, a0, a1, L.dim, P.slice_rows, P.slice_targets);
    P.n_slice = P.slice_rows.rows();
    P.n_cont = L.T * L.N - 1;
    const Index rows = P.n_cont + (L.T - 1) * P.n_slice;

    std::vector<Trip> at;
    VectorXd b = VectorXd::Zero(rows);
    for (Index k = 0; k < L.T; ++k) {
        for (Index i = 0; i < L.n0; ++i) {
            for (Index j = 0; j < L.n1; ++j) {
                const Index c = i * L.n1 + j;
                const Index r = k * L.N + c;
                if (r >= P.n_cont) continue;
                if (k + 1 <= L.T - 1) at.emplace_back(r, L.rho(k + 1, c), 1.0 / L.dt);
                else b[r] -= P.rho_f[c] / L.dt;
                if (k >= 1) at.emplace_back(r, L.rho(k, c), -1.0 / L.dt);
                else b[r] += P.rho_i[c] / L.dt;
                if (i + 1 < L.n0) at.emplace_back(r, L.m0(k, i, j), 1.0 / L.dx0);
                if (i >= 1) at.emplace_back(r, L.m0(k, i - 1, j), -1.0 / L.dx0);
                if (L.dim == 2) {
                    if (j + 1 < L.n1) at.emplace_back(r, L.m1(k, i, j), 1.0 / L.dx1);
                    if (j >= 1) at.emplace_back(r, L.m1(k, i, j - 1), -1.0 / L.dx1);
                }
            }
        }
    }
    for (Index k = 1; k < L.T; ++k) {
        for (Index q = 0; q < P.n_slice; ++q) {
            const Index r = P.n_cont + (k - 1) * P.n_slice + q;
            for (Index c = 0; c < L.N; ++c) {
                const double v = P.slice_rows(q, c) * L.cellvol;
                if (v != 0.0) at.emplace_back(r, L.rho(k, c), v);
            }
            b[r] = P.slice_targets[q];
        }
    }
    SpMat A(rows, L.nU());
    A.setFromTriplets(at.begin(), at.end());
    P.row_scale = VectorXd::Zero(rows);
    for (Index col = 0; col < A.outerSize(); ++col)
        for (SpMat::InnerIterator it(A, col); it; ++it) P.row_scale[it.row()] += it.value() * it.value();
    P.row_scale = P.row_scale.cwiseSqrt();
    const VectorXd inv = P.row_scale.cwiseInverse();
    P.A = inv.asDiagonal() * A;
    P.b = inv.cwiseProduct(b);

    const SpMat M = P.A * P.A.transpose();
    P.chol.compute(M);
    if (P.chol.info() != Eigen::Success) throw Infeasible("constraint system is rank deficient");
}

// Orthogonal projection onto {A U = b}.
void project(const Problem& P, VectorXd& U, int refinements = 0) {
    for (int r = 0; r <= refinements; ++r) {
        const VectorXd res = P.A * U - P.b;
        U.noalias() -= P.A.transpose() * P.chol.solve(res);
    }
}

// Projection of (a, b) onto the parabola {a + |b|^2/2 <= 0}.
void project_parabola(double& a, double* b, int dim) {
    double beta2 = 0.0;
    for (int q = 0; q < dim; ++q) beta2 += b[q] * b[q];
    if (a + 0.5 * beta2 <= 0.0) return;
    const double beta = std::sqrt(beta2);
    // Largest root of s^3/2 + (a + 1) s - beta on (0, beta]; Newton from beta is monotone.
    double s = beta;
    for (int it = 0; it < 60; ++it) {
        const double g = 0.5 * s * s * s + (a + 1.0) * s - beta;
        const double dg = 1.5 * s * s + a + 1.0;
        if (dg <= 0.0) break;
        const double step = g / dg;
        s -= step;
        if (std::abs(step) <= 1e-15 * std::max(1.0, s)) break;
    }
    if (!(s > 0.0) || beta == 0.0) s = 0.0;
    const double f = beta > 0.0 ? s / beta : 0.0;
    for (int q = 0; q < dim; ++q) b[q] *= f;
    a = -0.5 * s * s;
}

void project_dual(const Layout& L, VectorXd& y) {
    const Index TN = L.T * L.N;
    double bb[2];
    for (Index p = 0; p < TN; ++p) {
        for (int q = 0; q < L.dim; ++q) bb[q] = y[(1 + q) * TN + p];
        project_parabola(y[p], bb, L.dim);
        for (int q = 0; q < L.dim; ++q) y[(1 + q) * TN + p] = bb[q];
    }
}

double kinetic(const Layout& L, const VectorXd& V, VectorXd* per_step = nullptr) {
    const Index TN = L.T * L.N;
    double total = 0.0;
    if (per_step) per_step->setZero(L.T);
    for (Index p = 0; p < TN; ++p) {
        const double a = V[p];
        if (a < 1e-14) continue;
        double bb = 0.0;
        for (int q = 0; q < L.dim; ++q) bb += V[(1 + q) * TN + p] * V[(1 + q) * TN + p];
        const double e = bb / a;
        total += 0.5 * e;
        if (per_step) (*per_step)[p / L.N] += e * L.cellvol;
    }
    return total * L.cellvol * L.dt;
}

// Minimum-norm d with (d_j + d_{j+1})/2 = r_j, j < len - 1 (tridiagonal normal equations).
void pair_average_min_norm(const double* r, Index len, Index stride_r, double* d, Index stride_d) {
    const Index m = len - 1;
    if (m <= 0) {
        for (Index j = 0; j < len; ++j) d[j * stride_d] = 0.0;
        return;
    }
    // E E^T: diag 1/2, off-diagonal 1/4.
    std::vector<double> cp(static_cast<std::size_t>(m)), dp(static_cast<std::size_t>(m));
    double beta = 0.5;
    cp[0] = 0.25 / beta;
    dp[0] = r[0] / beta;
    for (Index j = 1; j < m; ++j) {
        beta = 0.5 - 0.25 * cp[static_cast<std::size_t>(j - 1)];
        cp[static_cast<std::size_t>(j)] = 0.25 / beta;
        dp[static_cast<std::size_t>(j)] = (r[j * stride_r] - 0.25 * dp[static_cast<std::size_t>(j - 1)]) / beta;
    }
    std::vector<double> z(static_cast<std::size_t>(m));
    z[static_cast<std::size_t>(m - 1)] = dp[static_cast<std::size_t>(m - 1)];
    for (Index j = m - 2; j >= 0; --j)
        z[static_cast<std::size_t>(j)] = dp[static_cast<std::size_t>(j)] - cp[static_cast<std::size_t>(j)] * z[static_cast<std::size_t>(j + 1)];
    for (Index j = 0; j < len; ++j) {
        double v = 0.0;
        if (j < m) v += 0.5 * z[static_cast<std::size_t>(j)];
        if (j >= 1) v += 0.5 * z[static_cast<std::size_t>(j - 1)];
        d[j * stride_d] = v;
    }
}

struct Certified {
    double value = -std::numeric_limits<double>::infinity();
    DualCertificate cert;
};

// Turns a dual iterate y (inside the parabola) into an exactly admissible
// discrete certificate and its dual value.
Certified certify(const Problem& P, const VectorXd& y, const Axis& a0, const Axis& a1) {
    const Layout& L = P.L;
    const Index TN = L.T * L.N;
    const VectorXd Kty = P.K.transpose() * y;
    VectorXd psi = P.chol.solve(P.A * Kty);
    const VectorXd r = Kty - P.A.transpose() * psi;

    // y' = y - delta with K^T delta = r, delta of minimum norm (decoupled lines).
    VectorXd yp = y;
    {
        VectorXd rr(L.T + 1), dd(L.T + 1);
        for (Index c = 0; c < L.N; ++c) {
            for (Index k = 1; k < L.T; ++k) rr[k - 1] = r[L.rho(k, c)];
            pair_average_min_norm(rr.data(), L.T, 1, dd.data(), 1);
            for (Index k = 0; k < L.T; ++k) yp[L.va(k, c)] -= dd[k];
        }
        VectorXd lr(std::max(L.n0, L.n1) + 1), ld(std::max(L.n0, L.n1) + 1);
        for (Index k = 0; k < L.T; ++k) {
            for (Index j = 0; j < L.n1; ++j) {
                for (Index i = 0; i + 1 < L.n0; ++i) lr[i] = r[L.m0(k, i, j)];
                pair_average_min_norm(lr.data(), L.n0, 1, ld.data(), 1);
                for (Index i = 0; i < L.n0; ++i) yp[L.vb(0, k, i * L.n1 + j)] -= ld[i];
            }
            if (L.dim == 2) {
                for (Index i = 0; i < L.n0; ++i) {
                    for (Index j = 0; j + 1 < L.n1; ++j) lr[j] = r[L.m1(k, i, j)];
                    pair_average_min_norm(lr.data(), L.n1, 1, ld.data(), 1);
                    for (Index j = 0; j < L.n1; ++j) yp[L.vb(1, k, i * L.n1 + j)] -= ld[j];
                }
            }
        }
    }
    // Restore a + |b|^2/2 <= 0 by a constant shift of a.
    double shift = 0.0;
    for (Index p = 0; p < TN; ++p) {
        double v = yp[p];
        for (int q = 0; q < L.dim; ++q) v += 0.5 * yp[(1 + q) * TN + p] * yp[(1 + q) * TN + p];
        shift = std::max(shift, v);
    }
    for (Index p = 0; p < TN; ++p) yp[p] -= shift;

    // Unscaled multipliers; the shift lands on the continuity rows as c dt (k - T + 1).
    VectorXd psi_u = psi.cwiseQuotient(P.row_scale);
    Eigen::MatrixXd phi(L.T, L.N);
    for (Index k = 0; k < L.T; ++k)
        for (Index c = 0; c < L.N; ++c) {
            const Index row = k * L.N + c;
            const double base = row < P.n_cont ? psi_u[row] : 0.0;
            phi(k, c) = -(base + shift * L.dt * static_cast<double>(k - L.T + 1));
        }
    Eigen::MatrixXd g(std::max<Index>(L.T - 1, 0), P.n_slice);
    double cterm = 0.0;
    for (Index k = 1; k < L.T; ++k)
        for (Index q = 0; q < P.n_slice; ++q) {
            const double v = psi_u[P.n_cont + (k - 1) * P.n_slice + q];
            g(k - 1, q) = v * L.cellvol;
            cterm += v * P.slice_targets[q];
        }
    const double w = L.cellvol * L.dt;

    DualCertificate cert;
    cert.kind = DualCertificate::Kind::Grid;
    cert.dim = L.dim;
    cert.axis0 = a0;
    cert.axis1 = a1;
    cert.time_steps = static_cast<int>(L.T);
    cert.phi = phi;
    cert.a.resize(L.T, L.N);
    cert.b.assign(static_cast<std::size_t>(L.dim), Eigen::MatrixXd(L.T, L.N));
    double worst = -std::numeric_limits<double>::infinity();
    for (Index k = 0; k < L.T; ++k)
        for (Index c = 0; c < L.N; ++c) {
            const Index p = k * L.N + c;
            cert.a(k, c) = yp[p];
            double v = yp[p];
            for (int q = 0; q < L.dim; ++q) {
                cert.b[static_cast<std::size_t>(q)](k, c) = yp[(1 + q) * TN + p];
                v += 0.5 * yp[(1 + q) * TN + p] * yp[(1 + q) * TN + p];
            }
            if (v > worst) {
                worst = v;
                cert.margin_t = (static_cast<double>(k) + 0.5) * L.dt;
                cert.margin_x = a0.center(c / L.n1);
            }
        }
    cert.margin = worst;
    cert.g = g;
    cert.constraint_term = w * cterm;

    Certified out;
    out.cert = std::move(cert);
    // <b, psi> with the shift included, plus <y', v0>.
    const VectorXd b_u = P.b.cwiseProduct(P.row_scale);
    double bpsi = 0.0;
    for (Index row = 0; row < P.n_cont; ++row) {
        const Index k = row / L.N;
        bpsi += b_u[row] * (psi_u[row] + shift * L.dt * static_cast<double>(k - L.T + 1));
    }
    bpsi += cterm;
    out.value = w * (bpsi + yp.dot(P.v0));
    return out;
}

// Exponential tilt (1D polynomial constraints) or iterative proportional
// fitting (2D marginals) of one clipped slice; both keep positivity.
void restore_constraints(VectorXd& m, const ConstraintSet& cs, const Layout& L, const Axis& a0) {
    if (L.dim == 1 && !cs.polynomials.empty()) {
        std::vector<std::function<double(double)>> fs;
        VectorXd targets(static_cast<Index>(cs.polynomials.size()));
        for (std::size_t r = 0; r < cs.polynomials.size(); ++r) {
            const auto& f = cs.polynomials[r];
            fs.push_back([&f](double x) { return f(x); });
            targets[static_cast<Index>(r)] = f.target;
        }
        try {
            m = tilt_to_moments(GridMeasure1D::normalized(a0, m), fs, targets, 1e-13).mass;
        } catch (const Infeasible&) {
            // Leave the slice as is; the residual is reported.
        }
        return;
    }
    if (L.dim == 2 && cs.marginals.size() == 2 && cs.polynomials.empty()) {
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(m.data(), L.n0, L.n1);
        const VectorXd& r0 = cs.marginals[0].axis == 0 ? cs.marginals[0].marginal : cs.marginals[1].marginal;
        const VectorXd& r1 = cs.marginals[0].axis == 0 ? cs.marginals[1].marginal : cs.marginals[0].marginal;
        for (int it = 0; it < 500; ++it) {
            const VectorXd rs = M.rowwise().sum();
            for (Index i = 0; i < L.n0; ++i)
                if (rs[i] > 0.0) M.row(i) *= r0[i] / rs[i];
            const VectorXd cs1 = M.colwise().sum().transpose();
            for (Index j = 0; j < L.n1; ++j)
                if (cs1[j] > 0.0) M.col(j) *= r1[j] / cs1[j];
            const double err = (VectorXd(M.rowwise().sum()) - r0).cwiseAbs().maxCoeff();
            if (err < 1e-15) break;
        }
    }
}

VectorXd flatten(const Eigen::MatrixXd& m) {
    VectorXd v(m.size());
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
    return v;
}

SpaceTimePath run(const VectorXd& mass_i, const VectorXd& mass_f, const ConstraintSet& cs, int dim, const Axis& a0,
                  const Axis& a1, int time_steps, const GeodesicOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    if (time_steps < 1) throw DomainError("time_steps must be positive");
    if (!(opts.tol > 0.0) || !(opts.gap_tol > 0.0)) throw DomainError("tolerances must be positive");

    Problem P;
    Layout& L = P.L;
    L.dim = dim;
    L.n0 = a0.n;
    L.n1 = dim == 2 ? a1.n : 1;
    L.N = L.n0 * L.n1;
    L.T = time_steps;
    L.dx0 = a0.dx;
    L.dx1 = dim == 2 ? a1.dx : 1.0;
    L.dt = 1.0 / time_steps;
    L.cellvol = L.dx0 * L.dx1;
    if (L.n0 < 2 || (dim == 2 && L.n1 < 2)) throw DomainError("geodesic grids need at least two cells per axis");
    build(P, mass_i, mass_f, cs, a0, a1);

    // Step sizes from |K| (power iteration on K^T K).
    VectorXd z = VectorXd::Ones(L.nU()).normalized();
    double knorm2 = 1.0;
    for (int it = 0; it < 100; ++it) {
        VectorXd w = P.K.transpose() * (P.K * z);
        knorm2 = w.norm();
        if (knorm2 == 0.0) break;
        z = w / knorm2;
    }
    const double knorm = std::sqrt(std::max(knorm2, 1e-300));
    const double tau = std::sqrt(0.99) * opts.step_ratio / knorm;
    const double sigma = std::sqrt(0.99) / (opts.step_ratio * knorm);

    // Start from the mixture interpolation with zero momentum, projected.
    VectorXd U = VectorXd::Zero(L.nU());
    for (Index k = 1; k < L.T; ++k) {
        const double t = static_cast<double>(k) * L.dt;
        U.segment(L.rho(k, 0), L.N) = (1.0 - t) * P.rho_i + t * P.rho_f;
    }
    project(P, U, 1);
    VectorXd Ubar = U;
    VectorXd y = VectorXd::Zero(L.nV());

    SpaceTimePath path;
    double prev_action = kinetic(L, P.K * U + P.v0);
    Certified best;
    double rel = std::numeric_limits<double>::infinity();
    long it = 0;
    bool converged = false;
    for (it = 1; it <= opts.max_iters; ++it) {
        y.noalias() += sigma * (P.K * Ubar + P.v0);
        project_dual(L, y);
        VectorXd Unew = U - tau * (P.K.transpose() * y);
        project(P, Unew);
        Ubar = 2.0 * Unew - U;
        U.swap(Unew);

        if (it % opts.check_every == 0) {
            const double act = kinetic(L, P.K * U + P.v0);
            rel = std::abs(act - prev_action) / std::max(act, 1e-300);
            prev_action = act;
            Certified c = certify(P, y, a0, a1);
            if (c.value > best.value) best = std::move(c);
            const double gap = act - best.value;
            const bool small_gap = act <= 1e-14 ? std::abs(gap) <= 1e-12 : gap <= opts.gap_tol * act;
            if ((rel < opts.tol || act <= 1e-14) && small_gap) {
                converged = true;
                break;
            }
            if (opts.max_seconds > 0.0 &&
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() > opts.max_seconds)
                break;
        }
    }
    project(P, U, 2);

    // Assemble the path.
    path.dim = dim;
    path.axis0 = a0;
    path.axis1 = a1;
    path.time_steps = time_steps;
    path.iterations = std::min(it, opts.max_iters);
    path.converged = converged;
    path.relative_change = rel;
    path.mass.resize(static_cast<std::size_t>(L.T + 1));
    path.mass.front() = mass_i;
    path.mass.back() = mass_f;
    double min_rho = 0.0;
    for (Index k = 1; k < L.T; ++k) {
        VectorXd m = U.segment(L.rho(k, 0), L.N) * L.cellvol;
        min_rho = std::min(min_rho, m.minCoeff() / L.cellvol);
        path.mass[static_cast<std::size_t>(k)] = m;
    }
    path.min_density = min_rho;
    path.momentum.assign(static_cast<std::size_t>(dim), {});
    for (Index k = 0; k < L.T; ++k) {
        path.momentum[0].push_back(U.segment(L.m0(k, 0, 0), (L.n0 - 1) * L.n1));
        if (dim == 2) path.momentum[1].push_back(U.segment(L.m1(k, 0, 0), L.n0 * (L.n1 - 1)));
    }
    path.action = kinetic(L, P.K * U + P.v0);
    if (!std::isfinite(best.value)) best = certify(P, y, a0, a1);
    path.certificate = best.cert;
    path.dual_value = best.value;
    path.duality_gap = path.action - best.value;

    if (opts.reparametrize && L.T >= 2 && path.action > 1e-14) {
        const VectorXd e = path.step_energy();
        VectorXd s(L.T + 1);
        s[0] = 0.0;
        for (Index k = 0; k < L.T; ++k) s[k + 1] = s[k] + std::sqrt(std::max(e[k], 0.0)) * L.dt;
        const double total = s[L.T];
        if (total > 0.0) {
            // Position of each uniform arc-length node in old time: step k, fraction f.
            std::vector<Index> kk(static_cast<std::size_t>(L.T + 1));
            std::vector<double> ff(static_cast<std::size_t>(L.T + 1));
            for (Index n = 0; n <= L.T; ++n) {
                const double target = total * static_cast<double>(n) / static_cast<double>(L.T);
                Index k = 0;
                while (k + 1 < L.T && s[k + 1] < target) ++k;
                const double seg = s[k + 1] - s[k];
                double f = seg > 0.0 ? (target - s[k]) / seg : 0.0;
                f = std::clamp(f, 0.0, 1.0);
                if (n == L.T) { k = L.T - 1; f = 1.0; }
                kk[static_cast<std::size_t>(n)] = k;
                ff[static_cast<std::size_t>(n)] = f;
            }
            auto old_time = [&](Index n) {
                return (static_cast<double>(kk[static_cast<std::size_t>(n)]) + ff[static_cast<std::size_t>(n)]) * L.dt;
            };
            std::vector<VectorXd> new_mass(static_cast<std::size_t>(L.T + 1));
            for (Index n = 0; n <= L.T; ++n) {
                const Index k = kk[static_cast<std::size_t>(n)];
                const double f = ff[static_cast<std::size_t>(n)];
                new_mass[static_cast<std::size_t>(n)] =
                    (1.0 - f) * path.mass[static_cast<std::size_t>(k)] + f * path.mass[static_cast<std::size_t>(k + 1)];
            }
            // New momentum: time average of the old piecewise-constant momentum over
            // the old interval, rescaled to the new unit step. Keeps continuity exact.
            std::vector<std::vector<VectorXd>> new_mom(static_cast<std::size_t>(dim));
            for (int ax = 0; ax < dim; ++ax) {
                for (Index n = 0; n < L.T; ++n) {
                    const double t0 = old_time(n), t1 = old_time(n + 1);
                    VectorXd acc = VectorXd::Zero(path.momentum[static_cast<std::size_t>(ax)][0].size());
                    for (Index k = 0; k < L.T; ++k) {
                        const double lo = std::max(t0, static_cast<double>(k) * L.dt);
                        const double hi = std::min(t1, static_cast<double>(k + 1) * L.dt);
                        if (hi > lo) acc += (hi - lo) * path.momentum[static_cast<std::size_t>(ax)][static_cast<std::size_t>(k)];
                    }
                    new_mom[static_cast<std::size_t>(ax)].push_back(acc / L.dt);
                }
            }
            path.mass = std::move(new_mass);
            path.momentum = std::move(new_mom);
            // Action of the resampled path.
            VectorXd V = VectorXd::Zero(L.nV());
            for (Index k = 0; k < L.T; ++k)
                for (Index c = 0; c < L.N; ++c) {
                    V[L.va(k, c)] = 0.5 * (path.mass[static_cast<std::size_t>(k)][c] +
                                           path.mass[static_cast<std::size_t>(k + 1)][c]) / L.cellvol;
                    const Index i = c / L.n1, j = c % L.n1;
                    const auto& m0 = path.momentum[0][static_cast<std::size_t>(k)];
                    double b0 = 0.0;
                    if (i >= 1) b0 += 0.5 * m0[(i - 1) * L.n1 + j];
                    if (i + 1 < L.n0) b0 += 0.5 * m0[i * L.n1 + j];
                    V[L.vb(0, k, c)] = b0;
                    if (dim == 2) {
                        const auto& m1 = path.momentum[1][static_cast<std::size_t>(k)];
                        double b1 = 0.0;
                        if (j >= 1) b1 += 0.5 * m1[i * (L.n1 - 1) + j - 1];
                        if (j + 1 < L.n1) b1 += 0.5 * m1[i * (L.n1 - 1) + j];
                        V[L.vb(1, k, c)] = b1;
                    }
                }
            path.action = kinetic(L, V);
            path.duality_gap = path.action - best.value;
        }
    }

    // Tail cells can end slightly negative (they carry no action under the
    // 0^2/0 convention). Clip them and put the slices back on the constraint
    // set; the action stays that of the exact-continuity iterate and the
    // continuity defect left by clipping is reported below.
    for (Index k = 1; k < L.T; ++k) {
        auto& m = path.mass[static_cast<std::size_t>(k)];
        m = m.cwiseMax(0.0);
        m /= m.sum();
        restore_constraints(m, cs, L, a0);
    }

    // Residuals of the returned discrete path.
    double cont = 0.0;
    for (Index k = 0; k < L.T; ++k) {
        const auto& m0 = path.momentum[0][static_cast<std::size_t>(k)];
        for (Index i = 0; i < L.n0; ++i)
            for (Index j = 0; j < L.n1; ++j) {
                const Index c = i * L.n1 + j;
                double v = (path.mass[static_cast<std::size_t>(k + 1)][c] - path.mass[static_cast<std::size_t>(k)][c]) /
                           (L.cellvol * L.dt);
                if (i + 1 < L.n0) v += m0[i * L.n1 + j] / L.dx0;
                if (i >= 1) v -= m0[(i - 1) * L.n1 + j] / L.dx0;
                if (dim == 2) {
                    const auto& m1 = path.momentum[1][static_cast<std::size_t>(k)];
                    if (j + 1 < L.n1) v += m1[i * (L.n1 - 1) + j] / L.dx1;
                    if (j >= 1) v -= m1[i * (L.n1 - 1) + j - 1] / L.dx1;
                }
                // Residual in mass units per unit time.
                cont = std::max(cont, std::abs(v) * L.cellvol);
            }
    }
    path.continuity_residual = cont;
    double cres = 0.0;
    for (Index k = 0; k <= L.T; ++k) {
        const auto& m = path.mass[static_cast<std::size_t>(k)];
        for (const auto& p : cs.polynomials) {
            double s = 0.0;
            for (Index i = 0; i < L.n0; ++i)
                for (Index j = 0; j < L.n1; ++j)
                    s += m[i * L.n1 + j] * (dim == 2 ? p(a0.center(i), a1.center(j)) : p(a0.center(i)));
            cres = std::max(cres, std::abs(s - p.target));
        }
        for (const auto& mg : cs.marginals) {
            for (Index q = 0; q < mg.marginal.size(); ++q) {
                double s = 0.0;
                for (Index i = 0; i < L.n0; ++i)
                    for (Index j = 0; j < L.n1; ++j)
                        if ((mg.axis == 0 ? i : j) == q) s += m[i * L.n1 + j];
                cres = std::max(cres, std::abs(s - mg.marginal[q]));
            }
        }
    }
    path.constraint_residual = cres;
    path.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return path;
}

void check_endpoints(const ConstraintSet& cs, double ri, double rf) {
    if (ri > 1e-8 || rf > 1e-8)
        throw Infeasible("endpoint violates constraints by " + std::to_string(std::max(ri, rf)));
    (void)cs;
}

}  // namespace

double SpaceTimePath::length() const { return std::sqrt(2.0 * std::max(action, 0.0)); }

GridMeasure1D SpaceTimePath::slice(int k) const {
    if (dim != 1) throw DomainError("slice() on a 2D path");
    return GridMeasure1D::normalized(axis0, mass.at(static_cast<std::size_t>(k)));
}

GridMeasure2D SpaceTimePath::slice2d(int k) const {
    if (dim != 2) throw DomainError("slice2d() on a 1D path");
    const auto& v = mass.at(static_cast<std::size_t>(k));
    Eigen::MatrixXd m(axis0.n, axis1.n);
    for (Index i = 0; i < axis0.n; ++i)
        for (Index j = 0; j < axis1.n; ++j) m(i, j) = v[i * axis1.n + j];
    return GridMeasure2D::normalized(axis0, axis1, m);
}

std::vector<GridMeasure1D> SpaceTimePath::slices() const {
    std::vector<GridMeasure1D> out;
    for (int k = 0; k <= time_steps; ++k) out.push_back(slice(k));
    return out;
}

std::vector<GridMeasure2D> SpaceTimePath::slices2d() const {
    std::vector<GridMeasure2D> out;
    for (int k = 0; k <= time_steps; ++k) out.push_back(slice2d(k));
    return out;
}

VectorXd SpaceTimePath::step_energy() const {
    const Index n0 = axis0.n, n1 = dim == 2 ? axis1.n : 1;
    const double cellvol = axis0.dx * (dim == 2 ? axis1.dx : 1.0);
    VectorXd e = VectorXd::Zero(time_steps);
    if (momentum.empty()) return e;
    for (int k = 0; k < time_steps; ++k) {
        const auto& m0 = momentum[0][static_cast<std::size_t>(k)];
        for (Index i = 0; i < n0; ++i)
            for (Index j = 0; j < n1; ++j) {
                const Index c = i * n1 + j;
                const double rho =
                    0.5 * (mass[static_cast<std::size_t>(k)][c] + mass[static_cast<std::size_t>(k + 1)][c]) / cellvol;
                if (rho < 1e-14) continue;
                double b0 = 0.0;
                if (i >= 1) b0 += 0.5 * m0[(i - 1) * n1 + j];
                if (i + 1 < n0) b0 += 0.5 * m0[i * n1 + j];
                double bb = b0 * b0;
                if (dim == 2) {
                    const auto& m1 = momentum[1][static_cast<std::size_t>(k)];
                    double b1 = 0.0;
                    if (j >= 1) b1 += 0.5 * m1[i * (n1 - 1) + j - 1];
                    if (j + 1 < n1) b1 += 0.5 * m1[i * (n1 - 1) + j];
                    bb += b1 * b1;
                }
                e[k] += bb / rho * cellvol;
            }
    }
    return e;
}

SpaceTimePath solve_geodesic(const GridMeasure1D& rho_i, const GridMeasure1D& rho_f, const ConstraintSet& constraints,
                             int time_steps, const GeodesicOptions& opts) {
    if (!(rho_i.axis == rho_f.axis)) throw DomainError("endpoints live on different grids");
    constraints.validate();
    if (constraints.dim != 1) throw DomainError("1D solve with a 2D constraint set");
    check_endpoints(constraints, constraints.max_residual(rho_i), constraints.max_residual(rho_f));
    return run(rho_i.mass, rho_f.mass, constraints, 1, rho_i.axis, Axis{}, time_steps, opts);
}

SpaceTimePath solve_geodesic(const GridMeasure2D& rho_i, const GridMeasure2D& rho_f, const ConstraintSet& constraints,
                             int time_steps, const GeodesicOptions& opts) {
    if (!(rho_i.axis0 == rho_f.axis0) || !(rho_i.axis1 == rho_f.axis1))
        throw DomainError("endpoints live on different grids");
    constraints.validate();
    if (constraints.dim != 2) throw DomainError("2D solve with a 1D constraint set");
    check_endpoints(constraints, constraints.max_residual(rho_i), constraints.max_residual(rho_f));
    return run(flatten(rho_i.mass), flatten(rho_f.mass), constraints, 2, rho_i.axis0, rho_i.axis1, time_steps, opts);
}

SpaceTimePath coupling_geodesic(const GridMeasure2D& rho_i, const GridMeasure2D& rho_f, int time_steps,
                                const GeodesicOptions& opts) {
    if (rho_i.axis0.n > 48 || rho_i.axis1.n > 48 || time_steps > 16)
        throw SizeError("coupling geodesics are capped at 48 x 48 cells and T <= 16");
    const ConstraintSet cs = ConstraintSet::marginals_of(rho_i);
    return solve_geodesic(rho_i, rho_f, cs, time_steps, opts);
}

}  // namespace wsub
