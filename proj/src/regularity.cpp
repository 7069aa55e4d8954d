#include "regmod/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace regmod {

FieldLoss diffusion(const DisplacementField& u) {
    const GridInfo& g = u.grid;
    for (int a = 0; a < g.ndim; ++a)
        if (g.dims[a] < 2)
            throw std::invalid_argument("diffusion: degenerate axis");
    int d = g.ndim;
    std::size_t N = g.voxel_count();
    double norm = 1.0 / (double(N) * d * d);

    FieldLoss out;
    out.grad = DisplacementField(g);
    double acc = 0.0;
    std::size_t stride[3];
    for (int a = 0; a < 3; ++a) {
        stride[a] = 1;
        for (int b = a + 1; b < 3; ++b)
            stride[a] *= std::size_t(g.dims[b]);
    }
    for (int c = 0; c < d; ++c) {
        const double* uc = u.component(c);
        double* gc = out.grad.component(c);
        for (int axis = 0; axis < d; ++axis) {
            std::size_t vox = 0;
            for (int i = 0; i < g.dims[0]; ++i)
                for (int j = 0; j < g.dims[1]; ++j)
                    for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                        int idx = axis == 0 ? i : (axis == 1 ? j : k);
                        if (idx + 1 >= g.dims[axis])
                            continue;
                        double diff = uc[vox + stride[axis]] - uc[vox];
                        acc += diff * diff;
                        gc[vox] -= 2.0 * norm * diff;
                        gc[vox + stride[axis]] += 2.0 * norm * diff;
                    }
        }
    }
    out.value = acc * norm;
    return out;
}

JacobianField jacobian_det(const DisplacementField& u) {
    const GridInfo& g = u.grid;
    for (int a = 0; a < g.ndim; ++a)
        if (g.dims[a] < 3)
            throw std::invalid_argument("jacobian_det: axis shorter than 3");
    int d = g.ndim;
    JacobianField out;
    out.grid = g;
    out.data.assign(g.voxel_count(), 0.0);

    std::size_t vox = 0;
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                int idx[3] = {i, j, k};
                double J[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
                for (int c = 0; c < d; ++c) {
                    const double* uc = u.component(c);
                    for (int axis = 0; axis < d; ++axis) {
                        int hi = std::min(idx[axis] + 1, g.dims[axis] - 1);
                        int lo = std::max(idx[axis] - 1, 0);
                        int ip[3] = {idx[0], idx[1], idx[2]};
                        int im[3] = {idx[0], idx[1], idx[2]};
                        ip[axis] = hi;
                        im[axis] = lo;
                        double deriv = (uc[g.index(ip[0], ip[1], ip[2])] -
                                        uc[g.index(im[0], im[1], im[2])]) /
                                       double(hi - lo);
                        J[c][axis] += deriv;
                    }
                }
                double det;
                if (d == 2) {
                    det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
                } else {
                    det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                          J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                          J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
                }
                out.data[vox] = det;
            }
    return out;
}

namespace {

template <typename Fn>
void for_masked(const JacobianField& j, const LabelVolume* mask, Fn&& fn) {
    if (mask && !mask->grid.same_extent(j.grid))
        throw std::invalid_argument("regularity: mask dims differ");
    std::size_t N = j.grid.voxel_count();
    std::size_t used = 0;
    for (std::size_t v = 0; v < N; ++v) {
        if (mask && mask->data[v] == 0)
            continue;
        fn(j.data[v]);
        ++used;
    }
    if (used == 0)
        throw std::invalid_argument("regularity: empty mask");
}

}  // namespace

double sd_log_j(const JacobianField& j, const LabelVolume* mask) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for_masked(j, mask, [&](double det) {
        double l = std::log(std::max(det, 1e-9));
        sum += l;
        sum2 += l * l;
        ++n;
    });
    double mean = sum / double(n);
    double var = std::max(sum2 / double(n) - mean * mean, 0.0);
    return std::sqrt(var);
}

double ndv(const JacobianField& j, const LabelVolume* mask) {
    std::size_t folded = 0, n = 0;
    for_masked(j, mask, [&](double det) {
        if (det <= 0.0)
            ++folded;
        ++n;
    });
    return double(folded) / double(n);
}

}  // namespace regmod
