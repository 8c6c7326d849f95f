#include "metrics/fft.hpp"

#include <cmath>
#include <numbers>

#include "core/error.hpp"

namespace bsldm::metrics {

namespace {

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<cplx>& a, bool inverse) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const real ang = 2.0 * std::numbers::pi / static_cast<real>(len) * (inverse ? 1.0 : -1.0);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

void dft_naive(std::vector<cplx>& a, bool inverse) {
    const size_t n = a.size();
    std::vector<cplx> out(n);
    const real sign = inverse ? 1.0 : -1.0;
    for (size_t k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (size_t j = 0; j < n; ++j) {
            const real ang = sign * 2.0 * std::numbers::pi * static_cast<real>(k * j) /
                             static_cast<real>(n);
            acc += a[j] * cplx(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    a.swap(out);
}

}  // namespace

void fft_1d(std::vector<cplx>& a, bool inverse) {
    require(!a.empty(), Status::InvalidArgument, "fft_1d: empty input");
    if (is_pow2(a.size()))
        fft_radix2(a, inverse);
    else
        dft_naive(a, inverse);
}

void dft_2d(const real* img, int h, int w, std::vector<cplx>& out) {
    require(h > 0 && w > 0, Status::InvalidArgument, "dft_2d: bad size");
    out.assign(static_cast<size_t>(h) * static_cast<size_t>(w), cplx(0.0, 0.0));
    std::vector<cplx> line;
    line.reserve(static_cast<size_t>(std::max(h, w)));
    for (int y = 0; y < h; ++y) {
        line.assign(static_cast<size_t>(w), cplx(0.0, 0.0));
        for (int x = 0; x < w; ++x) line[static_cast<size_t>(x)] = cplx(img[y * w + x], 0.0);
        fft_1d(line, false);
        for (int x = 0; x < w; ++x) out[static_cast<size_t>(y) * w + x] = line[static_cast<size_t>(x)];
    }
    for (int x = 0; x < w; ++x) {
        line.assign(static_cast<size_t>(h), cplx(0.0, 0.0));
        for (int y = 0; y < h; ++y) line[static_cast<size_t>(y)] = out[static_cast<size_t>(y) * w + x];
        fft_1d(line, false);
        for (int y = 0; y < h; ++y) out[static_cast<size_t>(y) * w + x] = line[static_cast<size_t>(y)];
    }
}

}  // namespace bsldm::metrics
