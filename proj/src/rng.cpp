#include "transcap/rng.hpp"

namespace transcap::rng {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_key(std::uint64_t master_seed, std::uint64_t realization,
                         std::uint64_t step, Stream stream) noexcept {
    std::uint64_t h = mix64(master_seed);
    h = mix64(h ^ realization);
    h = mix64(h ^ step);
    return mix64(h ^ static_cast<std::uint64_t>(stream));
}

CounterRng::CounterRng(std::uint64_t master_seed, std::uint64_t realization,
                       std::uint64_t step, Stream stream)
    : engine_(derive_key(master_seed, realization, step, stream)) {}

CounterRng::CounterRng(std::uint64_t key) : engine_(key) {}

double CounterRng::normal() { return normal_(engine_); }

double CounterRng::uniform() { return uniform_(engine_); }

Vector CounterRng::normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = normal_(engine_);
    }
    return v;
}

Matrix random_orthogonal(Eigen::Index d, std::uint64_t seed) {
    CounterRng gen(seed, 0, 0, Stream::rotation);
    Matrix g(d, d);
    for (Eigen::Index c = 0; c < d; ++c) {
        for (Eigen::Index r = 0; r < d; ++r) {
            g(r, c) = gen.normal();
        }
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Sign fix so the distribution is Haar rather than QR-biased.
    for (Eigen::Index i = 0; i < d; ++i) {
        if (r(i, i) < 0.0) {
            q.col(i) *= -1.0;
        }
    }
    return q;
}

} // namespace transcap::rng
