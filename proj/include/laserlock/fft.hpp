#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <cstddef>

namespace laserlock::fft {

/// Thin wrapper over Eigen's FFT that keeps plans across calls of the same
/// length. Forward: X_k = sum_n x_n exp(-2 pi i k n / N); inverses include 1/N.
class Engine {
public:
    Engine();

    /// Non-negative half of the spectrum of a real sequence, N/2 + 1 bins.
    Eigen::VectorXcd forward_real(const Eigen::Ref<const Eigen::VectorXd>& x);
    /// Inverse of forward_real for an even output length n.
    Eigen::VectorXd inverse_real(const Eigen::Ref<const Eigen::VectorXcd>& half, Eigen::Index n);

    Eigen::VectorXcd forward(const Eigen::Ref<const Eigen::VectorXcd>& x);
    Eigen::VectorXcd inverse(const Eigen::Ref<const Eigen::VectorXcd>& X);

private:
    Eigen::FFT<double> real_;
    Eigen::FFT<double> complex_;
};

inline Eigen::VectorXcd forward_real(const Eigen::Ref<const Eigen::VectorXd>& x) {
    return Engine().forward_real(x);
}
inline Eigen::VectorXd inverse_real(const Eigen::Ref<const Eigen::VectorXcd>& half, Eigen::Index n) {
    return Engine().inverse_real(half, n);
}
inline Eigen::VectorXcd forward(const Eigen::Ref<const Eigen::VectorXcd>& x) { return Engine().forward(x); }
inline Eigen::VectorXcd inverse(const Eigen::Ref<const Eigen::VectorXcd>& X) { return Engine().inverse(X); }

std::size_t next_pow2(std::size_t n);

} // namespace laserlock::fft
