#pragma once

#include <vector>

namespace divinv {

/// Exact solver for the 7-point Dirichlet Laplacian
///   (A u)_f = sum_d (2 u_f - u_{f-d} - u_{f+d}) / h_d^2,   u = 0 outside,
/// on an mx x my x mz lattice, diagonalized by DST-I along each axis.
/// Used as the inner solve of the Uzawa iteration on full-box regions.
class DstPoisson3D {
public:
    DstPoisson3D(int mx, int my, int mz, double hx, double hy, double hz);
    ~DstPoisson3D();
    DstPoisson3D(const DstPoisson3D&) = delete;
    DstPoisson3D& operator=(const DstPoisson3D&) = delete;

    /// Solve A w = r in place; `data` is x-fastest with extents (mx, my, mz).
    void solve(std::vector<double>& data);

private:
    int mx_, my_, mz_;
    std::vector<double> lam_x_, lam_y_, lam_z_;
    double norm_;
    double* buf_;
    void* plan_; // fftw_plan
};

} // namespace divinv
