#pragma once

#include <vector>

#include <Eigen/SparseCore>

namespace ncqvi {

/// Zero-fill incomplete LU on the pattern of a row-major matrix, usable as an Eigen
/// iterative-solver preconditioner.  Stable for M-matrices.
class Ilu0 {
public:
    using StorageIndex = int;
    using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic };

    Ilu0() = default;
    template <typename M>
    explicit Ilu0(const M& A) {
        compute(A);
    }

    template <typename M>
    Ilu0& analyzePattern(const M&) {
        return *this;
    }
    template <typename M>
    Ilu0& factorize(const M& A) {
        return compute(A);
    }
    Ilu0& compute(const Eigen::Ref<const Matrix>& A);

    template <typename Rhs>
    Eigen::VectorXd solve(const Rhs& b) const {
        Eigen::VectorXd x = b;
        apply(x);
        return x;
    }
    void apply(Eigen::VectorXd& x) const;
    Eigen::ComputationInfo info() const { return info_; }
    Eigen::Index rows() const { return n_; }
    Eigen::Index cols() const { return n_; }

private:
    Eigen::Index n_ = 0;
    std::vector<int> ptr_, col_, diag_;
    std::vector<double> val_;
    Eigen::ComputationInfo info_ = Eigen::Success;
};

}  // namespace ncqvi
