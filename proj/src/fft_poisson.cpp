#include "divinv/fft_poisson.hpp"

#include <cmath>
#include <cstring>
#include <mutex>

#include <fftw3.h>

namespace divinv {

// FFTW plan creation/destruction is not thread-safe; execution on distinct
// plans is.
static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

static constexpr double kPi = 3.14159265358979323846;

// DST-I of length m carries Dirichlet chains with denominator m+1.
static std::vector<double> dirichlet_eigenvalues(int m, double h) {
    std::vector<double> lam(m);
    for (int t = 0; t < m; ++t) {
        double s = std::sin(kPi * (t + 1) / (2.0 * (m + 1)));
        lam[t] = 4.0 / (h * h) * s * s;
    }
    return lam;
}

DstPoisson3D::DstPoisson3D(int mx, int my, int mz, double hx, double hy, double hz)
    : mx_(mx), my_(my), mz_(mz),
      lam_x_(dirichlet_eigenvalues(mx, hx)),
      lam_y_(dirichlet_eigenvalues(my, hy)),
      lam_z_(dirichlet_eigenvalues(mz, hz)) {
    norm_ = 1.0 / (8.0 * double(mx + 1) * double(my + 1) * double(mz + 1));
    std::lock_guard<std::mutex> lock(planner_mutex());
    buf_ = fftw_alloc_real(std::size_t(mx) * my * mz);
    // FFTW_ESTIMATE keeps plan selection deterministic run to run
    plan_ = fftw_plan_r2r_3d(mz, my, mx, buf_, buf_, FFTW_RODFT00, FFTW_RODFT00,
                             FFTW_RODFT00, FFTW_ESTIMATE);
}

DstPoisson3D::~DstPoisson3D() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_));
    fftw_free(buf_);
}

void DstPoisson3D::solve(std::vector<double>& data) {
    std::size_t n = std::size_t(mx_) * my_ * mz_;
    std::memcpy(buf_, data.data(), n * sizeof(double));
    fftw_execute(static_cast<fftw_plan>(plan_));
    std::size_t idx = 0;
    for (int k = 0; k < mz_; ++k)
        for (int j = 0; j < my_; ++j) {
            double lyz = lam_y_[j] + lam_z_[k];
            for (int i = 0; i < mx_; ++i, ++idx) buf_[idx] /= lam_x_[i] + lyz;
        }
    fftw_execute(static_cast<fftw_plan>(plan_));
    for (std::size_t i = 0; i < n; ++i) data[i] = buf_[i] * norm_;
}

} // namespace divinv
