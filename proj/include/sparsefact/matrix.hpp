#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sparsefact/common.hpp"

namespace sparsefact {

using RowMajorXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Triplet {
    int row;
    int col;
    std::int32_t value;
};

// Exact integer sparse matrix in compressed-column form. Entries are
// column-grouped with rows ascending inside a column and never hold an
// explicit zero -- the invariants the text format (SMF1) relies on.
class SparseIntMatrix {
  public:
    SparseIntMatrix() : rows_(0), cols_(0), col_ptr_(1, 0) {}

    SparseIntMatrix(int rows, int cols)
        : rows_(rows), cols_(cols), col_ptr_(static_cast<std::size_t>(cols) + 1, 0) {}

    static SparseIntMatrix from_triplets(int rows, int cols, std::vector<Triplet> ts) {
        std::sort(ts.begin(), ts.end(), [](const Triplet& a, const Triplet& b) {
            return a.col != b.col ? a.col < b.col : a.row < b.row;
        });
        SparseIntMatrix m(rows, cols);
        m.row_idx_.reserve(ts.size());
        m.values_.reserve(ts.size());
        std::size_t k = 0;
        for (int j = 0; j < cols; ++j) {
            while (k < ts.size() && ts[k].col == j) {
                int r = ts[k].row;
                std::int32_t v = ts[k].value;
                ++k;
                // merge duplicates (same row, col) by summing
                while (k < ts.size() && ts[k].col == j && ts[k].row == r) {
                    v += ts[k].value;
                    ++k;
                }
                if (v != 0) {
                    m.row_idx_.push_back(r);
                    m.values_.push_back(v);
                }
            }
            m.col_ptr_[static_cast<std::size_t>(j) + 1] = static_cast<std::int64_t>(m.row_idx_.size());
        }
        return m;
    }

    // One already-sorted, zero-free column at a time (generator fast path).
    void push_column(const std::vector<std::pair<int, std::int32_t>>& entries) {
        for (const auto& [r, v] : entries) {
            row_idx_.push_back(r);
            values_.push_back(v);
        }
        col_ptr_.push_back(static_cast<std::int64_t>(row_idx_.size()));
        ++cols_;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::int64_t nnz() const { return static_cast<std::int64_t>(row_idx_.size()); }

    std::int64_t col_begin(int j) const { return col_ptr_[static_cast<std::size_t>(j)]; }
    std::int64_t col_end(int j) const { return col_ptr_[static_cast<std::size_t>(j) + 1]; }
    int entry_row(std::int64_t k) const { return row_idx_[static_cast<std::size_t>(k)]; }
    std::int32_t entry_value(std::int64_t k) const { return values_[static_cast<std::size_t>(k)]; }

    std::vector<std::pair<int, std::int32_t>> column(int j) const {
        std::vector<std::pair<int, std::int32_t>> out;
        for (std::int64_t k = col_begin(j); k < col_end(j); ++k)
            out.emplace_back(entry_row(k), entry_value(k));
        return out;
    }

    Eigen::MatrixXd to_dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows_, cols_);
        for (int j = 0; j < cols_; ++j)
            for (std::int64_t k = col_begin(j); k < col_end(j); ++k)
                m(entry_row(k), j) = static_cast<double>(entry_value(k));
        return m;
    }

    bool operator==(const SparseIntMatrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && col_ptr_ == o.col_ptr_ &&
               row_idx_ == o.row_idx_ && values_ == o.values_;
    }

  private:
    int rows_;
    int cols_;
    std::vector<std::int64_t> col_ptr_;
    std::vector<int> row_idx_;
    std::vector<std::int32_t> values_;
};

// Dense double matrix, row-major, with Eigen views for the heavy kernels.
class DenseMatrix {
  public:
    DenseMatrix() : rows_(0), cols_(0) {}
    DenseMatrix(int rows, int cols)
        : rows_(rows), cols_(cols),
          data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0) {}

    static DenseMatrix from_eigen(const Eigen::MatrixXd& m) {
        DenseMatrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
        out.map() = m;
        return out;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) {
        return data_[static_cast<std::size_t>(i) * cols_ + j];
    }
    double operator()(int i, int j) const {
        return data_[static_cast<std::size_t>(i) * cols_ + j];
    }

    Eigen::Map<RowMajorXd> map() {
        return Eigen::Map<RowMajorXd>(data_.data(), rows_, cols_);
    }
    Eigen::Map<const RowMajorXd> map() const {
        return Eigen::Map<const RowMajorXd>(data_.data(), rows_, cols_);
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double frobenius() const { return map().norm(); }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

  private:
    int rows_;
    int cols_;
    std::vector<double> data_;
};

}  // namespace sparsefact
