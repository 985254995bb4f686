#include "ncqvi/ilu0.hpp"

#include <cmath>

namespace ncqvi {

Ilu0& Ilu0::compute(const Eigen::Ref<const Matrix>& A) {
    n_ = A.rows();
    const int n = static_cast<int>(n_);
    ptr_.assign(n + 1, 0);
    col_.clear();
    val_.clear();
    col_.reserve(A.nonZeros());
    val_.reserve(A.nonZeros());
    for (int r = 0; r < n; ++r) {
        for (Eigen::Ref<const Matrix>::InnerIterator it(A, r); it; ++it) {
            col_.push_back(static_cast<int>(it.col()));
            val_.push_back(it.value());
        }
        ptr_[r + 1] = static_cast<int>(col_.size());
    }
    diag_.assign(n, -1);
    std::vector<int> where(n, -1);
    info_ = Eigen::Success;
    for (int r = 0; r < n; ++r) {
        for (int q = ptr_[r]; q < ptr_[r + 1]; ++q) where[col_[q]] = q;
        for (int q = ptr_[r]; q < ptr_[r + 1]; ++q) {
            const int k = col_[q];
            if (k >= r) break;
            const double lk = val_[q] / val_[diag_[k]];
            val_[q] = lk;
            for (int s = diag_[k] + 1; s < ptr_[k + 1]; ++s) {
                const int w = where[col_[s]];
                if (w >= 0) val_[w] -= lk * val_[s];
            }
        }
        for (int q = ptr_[r]; q < ptr_[r + 1]; ++q) {
            if (col_[q] == r) diag_[r] = q;
            where[col_[q]] = -1;
        }
        if (diag_[r] < 0 || !(std::abs(val_[diag_[r]]) > 0.0)) {
            info_ = Eigen::NumericalIssue;
            return *this;
        }
    }
    return *this;
}

void Ilu0::apply(Eigen::VectorXd& x) const {
    const int n = static_cast<int>(n_);
    for (int r = 0; r < n; ++r) {
        double s = x[r];
        for (int q = ptr_[r]; q < diag_[r]; ++q) s -= val_[q] * x[col_[q]];
        x[r] = s;
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = x[r];
        for (int q = diag_[r] + 1; q < ptr_[r + 1]; ++q) s -= val_[q] * x[col_[q]];
        x[r] = s / val_[diag_[r]];
    }
}

}  // namespace ncqvi
