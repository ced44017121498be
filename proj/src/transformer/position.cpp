#include "situ/transformer/position.hpp"

#include <cmath>

#include "situ/common/error.hpp"

namespace situ::tf {

num::Tensor sinusoidal_pe(std::size_t h, std::size_t w, std::size_t dim) {
    if (dim == 0 || dim % 4 != 0) throw ConfigError("sinusoidal_pe: dim must be a positive multiple of 4");
    if (h == 0 || w == 0) throw ConfigError("sinusoidal_pe: empty grid");
    const std::size_t half = dim / 2;
    std::vector<double> pe(h * w * dim);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double* row = pe.data() + (y * w + x) * dim;
            for (std::size_t k = 0; k < half / 2; ++k) {
                const double f = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(half));
                row[2 * k] = std::sin(static_cast<double>(y) * f);
                row[2 * k + 1] = std::cos(static_cast<double>(y) * f);
                row[half + 2 * k] = std::sin(static_cast<double>(x) * f);
                row[half + 2 * k + 1] = std::cos(static_cast<double>(x) * f);
            }
        }
    }
    return num::Tensor::from({h * w, dim}, std::move(pe));
}

}  // namespace situ::tf
