#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace dflsim {

using NodeId = std::uint32_t;
using Label = std::uint8_t;  // 0 benign, 1 malicious

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Feature rows plus one binary label per row.
struct LabeledRows {
    Matrix features;
    std::vector<Label> labels;

    std::size_t size() const noexcept { return labels.size(); }
    bool empty() const noexcept { return labels.empty(); }

    friend bool operator==(const LabeledRows& a, const LabeledRows& b) {
        return a.labels == b.labels && a.features.rows() == b.features.rows() &&
               a.features.cols() == b.features.cols() && a.features == b.features;
    }
};

}  // namespace dflsim
