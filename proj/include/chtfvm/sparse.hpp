#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <atomic>
#include <chrono>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "chtfvm/common.hpp"

namespace cht {

/// Process-wide accumulators (microseconds) behind the run-manifest phase
/// timings: matrix assembly/finalize, factorizations, triangular solves.
struct SolverTimers {
    std::atomic<long long> assembly_us{0};
    std::atomic<long long> factorize_us{0};
    std::atomic<long long> solve_us{0};

    static SolverTimers& instance() {
        static SolverTimers t;
        return t;
    }
    void reset() { assembly_us = factorize_us = solve_us = 0; }
};

namespace detail {
class ScopedTimer {
  public:
    explicit ScopedTimer(std::atomic<long long>& sink)
        : sink_(sink), t0_(std::chrono::steady_clock::now()) {}
    ~ScopedTimer() {
        sink_ += std::chrono::duration_cast<std::chrono::microseconds>(
                     std::chrono::steady_clock::now() - t0_)
                     .count();
    }

  private:
    std::atomic<long long>& sink_;
    std::chrono::steady_clock::time_point t0_;
};
}  // namespace detail

/// Sparse linear system with additive assembly, a finalize step that merges
/// duplicate entries, and a cached direct factorization. Coefficients are
/// immutable after finalize; the right-hand side may be replaced between
/// solves so one factorization serves many solves.
class LinearSystem {
  public:
    explicit LinearSystem(int n) : n_(n), rhs_(Eigen::VectorXd::Zero(n)) {
        if (n < 1) throw std::invalid_argument("LinearSystem: dimension must be >= 1");
    }

    void add(int row, int col, double v) {
        if (finalized_) throw std::logic_error("LinearSystem: add() after finalize");
        trips_.emplace_back(row, col, v);
    }

    void finalize() {
        if (finalized_) return;
        detail::ScopedTimer t(SolverTimers::instance().assembly_us);
        A_.resize(n_, n_);
        A_.setFromTriplets(trips_.begin(), trips_.end());  // merges duplicates additively
        A_.makeCompressed();
        trips_.clear();
        trips_.shrink_to_fit();
        finalized_ = true;
    }

    bool finalized() const { return finalized_; }
    int size() const { return n_; }
    const Eigen::SparseMatrix<double>& matrix() const { return A_; }

    void set_rhs(const Eigen::VectorXd& b) {
        if (b.size() != n_) throw std::invalid_argument("LinearSystem: rhs dimension mismatch");
        rhs_ = b;
    }
    void set_rhs(const Field& b) {
        if (static_cast<int>(b.size()) != n_)
            throw std::invalid_argument("LinearSystem: rhs dimension mismatch");
        rhs_ = Eigen::Map<const Eigen::VectorXd>(b.data(), n_);
    }
    Eigen::VectorXd& rhs() { return rhs_; }
    const Eigen::VectorXd& rhs() const { return rhs_; }

    /// Solve A x = rhs. With reuse_factorization the factorization computed on
    /// a previous solve is used; otherwise one is (re)computed and cached.
    /// Verifies the residual and reports singular systems.
    Eigen::VectorXd solve(bool reuse_factorization = false) {
        finalize();
        if (!lu_ || !reuse_factorization) {
            detail::ScopedTimer t(SolverTimers::instance().factorize_us);
            lu_ = std::make_unique<Solver>();
            lu_->analyzePattern(A_);
            lu_->factorize(A_);
            if (lu_->info() != Eigen::Success) {
                std::string msg = lu_->lastErrorMessage();
                lu_.reset();
                throw std::runtime_error("LinearSystem: factorization failed (zero/near-zero pivot): " + msg);
            }
        }
        detail::ScopedTimer t(SolverTimers::instance().solve_us);
        Eigen::VectorXd x = lu_->solve(rhs_);
        double res = (A_ * x - rhs_).lpNorm<Eigen::Infinity>() /
                     std::max(1.0, rhs_.lpNorm<Eigen::Infinity>());
        if (!std::isfinite(res) || res > tolerance_)
            throw std::runtime_error(
                "LinearSystem: solve residual " + format_double(res) +
                " exceeds tolerance; matrix is singular or severely ill-conditioned (near-zero pivot)");
        return x;
    }

    void set_tolerance(double t) { tolerance_ = t; }

  private:
    using Solver = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;
    int n_;
    std::vector<Eigen::Triplet<double>> trips_;
    Eigen::SparseMatrix<double> A_;
    Eigen::VectorXd rhs_;
    std::unique_ptr<Solver> lu_;
    bool finalized_ = false;
    double tolerance_ = 1e-10;
};

}  // namespace cht
