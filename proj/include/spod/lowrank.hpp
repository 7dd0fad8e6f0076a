#pragma once

#include "spod/types.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace spod {

/// Thin singular triple, singular values descending.
struct SVDTriple {
    Matrix U;
    Vector S;
    Matrix V;

    Index size() const noexcept { return S.size(); }

    Matrix reconstruct() const { return U * S.asDiagonal() * V.transpose(); }

    SVDTriple leading(Index r) const {
        r = std::min(r, size());
        return {U.leftCols(r), S.head(r), V.leftCols(r)};
    }
};

struct TruncatedSVD {
    SVDTriple triple;
    double frobenius_norm = 0.0;  ///< ||A||_F from the entries
};

struct SvdOptions {
    /// Matrices whose smaller side reaches this size and whose requested rank
    /// is at most a quarter of it go through the Gram route.
    Index gram_min_side = 48;
    /// Largest side for which full spectra are computed.
    Index full_spectrum_cap = 2048;
};

namespace detail {

// Largest-magnitude entry of each left singular vector made positive.
inline void fix_signs(SVDTriple& t) {
    for (Index l = 0; l < t.U.cols(); ++l) {
        Index imax = 0;
        t.U.col(l).cwiseAbs().maxCoeff(&imax);
        if (t.U(imax, l) < 0.0) {
            t.U.col(l) *= -1.0;
            t.V.col(l) *= -1.0;
        }
    }
}

inline SVDTriple dense_svd(const Matrix& a, Index r) {
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    r = std::min<Index>(r, svd.singularValues().size());
    SVDTriple t{svd.matrixU().leftCols(r), svd.singularValues().head(r),
                svd.matrixV().leftCols(r)};
    fix_signs(t);
    return t;
}

// Leading subspace from the eigenvectors of the smaller Gram matrix, refined by
// one Rayleigh-Ritz step on the original matrix. Returns false when the
// requested spectrum is too graded for the squared problem to be trusted.
inline bool gram_svd(const Matrix& a, Index r, SVDTriple& out) {
    const bool tall = a.rows() >= a.cols();
    const Index side = tall ? a.cols() : a.rows();
    Matrix gram(side, side);
    gram.setZero();
    if (tall)
        gram.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
    else
        gram.selfadjointView<Eigen::Lower>().rankUpdate(a);
    // Top r+1 eigenpairs only (the extra one feeds the degeneracy diagnostic).
    const Index take = std::min(side, r + 1);
    Vector lambda(side);
    Matrix basis(side, take);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(take));
    lapack_int found = 0;
    const auto ns = static_cast<lapack_int>(side);
    const lapack_int info = LAPACKE_dsyevr(
        LAPACK_COL_MAJOR, 'V', 'I', 'L', ns, gram.data(), ns, 0.0, 0.0,
        ns - static_cast<lapack_int>(take) + 1, ns, 0.0, &found, lambda.data(),
        basis.data(), ns, support.data());
    if (info != 0 || found != take)
        return false;
    // Ascending from LAPACK; reorder to descending.
    lambda = lambda.head(take).reverse().eval();
    basis = basis.rowwise().reverse().eval();
    if (lambda[0] <= 0.0 || lambda[r - 1] < 1e-6 * lambda[0])
        return false;

    // Rayleigh-Ritz on span(A basis) or span(A^T basis).
    const Matrix image = tall ? Matrix(a * basis) : Matrix(a.transpose() * basis);
    Eigen::HouseholderQR<Matrix> qr(image);
    const Matrix q = qr.householderQ() * Matrix::Identity(image.rows(), take);
    const Matrix small = tall ? Matrix(q.transpose() * a) : Matrix(a * q);
    Eigen::JacobiSVD<Matrix> svd(small, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (tall) {
        out.U = q * svd.matrixU();
        out.V = svd.matrixV();
    } else {
        out.U = svd.matrixU();
        out.V = q * svd.matrixV();
    }
    out.S = svd.singularValues();
    fix_signs(out);
    return true;
}

inline void check_svd_input(const Matrix& a) {
    if (a.size() == 0)
        throw DataError("SVD of an empty matrix");
    if (!a.allFinite())
        throw DataError("SVD input contains non-finite values");
}

}  // namespace detail

/// Leading-r singular triple of A. When available the (r+1)-th singular value
/// is computed as well and kept in `next_singular_value`.
struct RankedSVD {
    SVDTriple triple;
    double frobenius_norm = 0.0;
    double next_singular_value = -1.0;  ///< s_{r+1}, or -1 when not computed
};

inline RankedSVD svd_ranked(const Matrix& a, Index r, const SvdOptions& opts = {}) {
    detail::check_svd_input(a);
    const Index d = std::min(a.rows(), a.cols());
    if (r < 1 || r > d)
        throw DataError("requested rank " + std::to_string(r) +
                        " outside [1, " + std::to_string(d) + "]");
    RankedSVD out;
    out.frobenius_norm = a.norm();
    SVDTriple t;
    const bool gram = d >= opts.gram_min_side && 4 * r <= d &&
                      detail::gram_svd(a, r, t);
    if (!gram)
        t = detail::dense_svd(a, std::min(d, r + 1));
    if (t.size() > r) {
        out.next_singular_value = t.S[r];
        t = t.leading(r);
        detail::fix_signs(t);
    }
    out.triple = std::move(t);
    return out;
}

/// Leading-r factors plus ||A||_F computed from the entries.
inline TruncatedSVD svd_truncated(const Matrix& a, Index r,
                                  const SvdOptions& opts = {}) {
    RankedSVD s = svd_ranked(a, r, opts);
    return {std::move(s.triple), s.frobenius_norm};
}

/// All min(rows, cols) singular triples.
inline SVDTriple svd_full(const Matrix& a, const SvdOptions& opts = {}) {
    detail::check_svd_input(a);
    if (std::max(a.rows(), a.cols()) > opts.full_spectrum_cap)
        throw DataError("full spectrum requested for a " +
                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                        " matrix, above the cap of " +
                        std::to_string(opts.full_spectrum_cap));
    return detail::dense_svd(a, std::min(a.rows(), a.cols()));
}

/// Singular values only.
inline Vector singular_values(const Matrix& a) {
    detail::check_svd_input(a);
    Eigen::BDCSVD<Matrix> svd(a);
    return svd.singularValues();
}

/// First-order change of each retained singular value under A -> A + dA:
/// diag(U^T dA V).
inline Vector singular_value_update(const SVDTriple& t, const Matrix& dA) {
    if (dA.rows() != t.U.rows() || dA.cols() != t.V.rows())
        throw DataError("perturbation shape does not match the decomposition");
    Vector ds(t.size());
    for (Index l = 0; l < t.size(); ++l)
        ds[l] = t.U.col(l).dot(dA * t.V.col(l));
    return ds;
}

struct PodResult {
    Matrix approximation;
    double rel_error = 0.0;
    SVDTriple modes;
};

/// Rank-r truncated SVD of the snapshot matrix in the lab frame.
inline PodResult pod_baseline(const Matrix& q, Index r, const SvdOptions& opts = {}) {
    TruncatedSVD t = svd_truncated(q, r, opts);
    PodResult out;
    out.approximation = t.triple.reconstruct();
    out.rel_error = t.frobenius_norm > 0.0
                        ? (q - out.approximation).norm() / t.frobenius_norm
                        : 0.0;
    out.modes = std::move(t.triple);
    return out;
}

/// POD of the original-domain rows of a snapshot field.
inline PodResult pod_baseline(const SnapshotField& q, Index r,
                              const SvdOptions& opts = {}) {
    return pod_baseline(Matrix(q.omega()), r, opts);
}

}  // namespace spod
