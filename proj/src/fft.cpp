#include "laserlock/fft.hpp"

#include <stdexcept>

namespace laserlock::fft {

Engine::Engine() { real_.SetFlag(Eigen::FFT<double>::HalfSpectrum); }

Eigen::VectorXcd Engine::forward_real(const Eigen::Ref<const Eigen::VectorXd>& x) {
    Eigen::VectorXcd out(x.size() / 2 + 1);
    real_.fwd(out.data(), x.data(), x.size());
    return out;
}

Eigen::VectorXd Engine::inverse_real(const Eigen::Ref<const Eigen::VectorXcd>& half, Eigen::Index n) {
    if (n % 2 != 0 || half.size() != n / 2 + 1)
        throw std::invalid_argument("inverse_real: expects even n and n/2+1 bins");
    Eigen::VectorXd out(n);
    real_.inv(out.data(), half.data(), n);
    return out;
}

Eigen::VectorXcd Engine::forward(const Eigen::Ref<const Eigen::VectorXcd>& x) {
    Eigen::VectorXcd out(x.size());
    complex_.fwd(out.data(), x.data(), x.size());
    return out;
}

Eigen::VectorXcd Engine::inverse(const Eigen::Ref<const Eigen::VectorXcd>& X) {
    Eigen::VectorXcd out(X.size());
    complex_.inv(out.data(), X.data(), X.size());
    return out;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

} // namespace laserlock::fft
