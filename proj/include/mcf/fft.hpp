#pragma once

#include "mcf/grid.hpp"

namespace mcf::fft {

enum class Dir { forward, inverse };

// In-place unitary 2-D FFT on an n-by-n grid, n a power of two.
// Forward kernel exp(-2*pi*i*(jm+kn)/n), inverse its conjugate, both
// scaled by 1/n so Parseval holds exactly: ||F x|| == ||x||.
void fft2d(CplxGrid& g, Dir dir);

// Quadrant swap moving index 0 to the grid centre (n even: self-inverse).
template <class T>
Grid<T> fftshift(const Grid<T>& in) {
    Grid<T> out(in.rows, in.cols);
    int hr = in.rows / 2, hc = in.cols / 2;
    for (int r = 0; r < in.rows; ++r)
        for (int c = 0; c < in.cols; ++c)
            out(r, c) = in((r + hr) % in.rows, (c + hc) % in.cols);
    return out;
}

}  // namespace mcf::fft
