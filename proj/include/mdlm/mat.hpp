#pragma once

#include <cstddef>
#include <vector>

namespace mdlm {

// Dense row-major matrix. float for training, double for gradient checks.
template <class S>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<S> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, S(0)) {}

    S* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
    const S* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

    S& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    const S& at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    size_t size() const { return data.size(); }

    void zero() { data.assign(data.size(), S(0)); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    template <class U>
    Mat<U> cast() const {
        Mat<U> out(rows, cols);
        for (size_t i = 0; i < data.size(); ++i) {
            out.data[i] = static_cast<U>(data[i]);
        }
        return out;
    }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

} // namespace mdlm
