#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "mcf/errors.hpp"

namespace mcf {

using cplx = std::complex<double>;

// Dense row-major 2-D array.
template <class T>
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    Grid() = default;
    Grid(int r, int c, T fill = T{}) : rows(r), cols(c), v(std::size_t(r) * std::size_t(c), fill) {}

    T& operator()(int r, int c) { return v[std::size_t(r) * cols + c]; }
    const T& operator()(int r, int c) const { return v[std::size_t(r) * cols + c]; }

    T* row(int r) { return v.data() + std::size_t(r) * cols; }
    const T* row(int r) const { return v.data() + std::size_t(r) * cols; }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    std::size_t size() const { return v.size(); }

    bool same_shape(const Grid& o) const { return rows == o.rows && cols == o.cols; }
};

using RealGrid = Grid<double>;
using CplxGrid = Grid<cplx>;

inline void require_square(const RealGrid& g, const char* what) {
    if (g.rows != g.cols) throw InvalidInput(std::string(what) + ": array must be square");
}

}  // namespace mcf
