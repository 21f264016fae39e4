#include "oracles.hpp"

#include <skewsplat/camera.hpp>
#include <skewsplat/kernel_math.hpp>

#include <cmath>
#include <vector>

namespace skewsplat::testing {

namespace {

constexpr int kBins = 20;
constexpr double kRange = 4.0;
constexpr int kSub = 12;

Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return q.toRotationMatrix();
}

}  // namespace

SkewCase random_skew_case(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n;
    SkewCase c;
    const Vec3 s(0.3 + 1.7 * u(rng), 0.3 + 1.7 * u(rng), 0.3 + 1.7 * u(rng));
    const Mat3 r = random_rotation(rng);
    c.sigma = r * s.cwiseAbs2().asDiagonal() * r.transpose();
    // Skewness of order 1 / sigma in a random direction.
    c.beta = Vec3(n(rng), n(rng), n(rng)) * (0.5 + 2.5 * u(rng)) / s.mean();
    for (;;) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 3; ++j) c.T(i, j) = n(rng);
        const Mat2 cov = c.T * c.sigma * c.T.transpose();
        Eigen::SelfAdjointEigenSolver<Mat2> es(cov);
        if (es.eigenvalues()[0] > 0.05 * es.eigenvalues()[1]) break;
    }
    return c;
}

double skew_projection_l1(const SkewCase& c, std::size_t samples, std::uint64_t seed, double dilation) {
    const Mat2 cov = c.T * c.sigma * c.T.transpose() + dilation * Mat2::Identity();
    const kernel::Skew2D sk = project_skewness(c.beta, c.T, c.sigma, cov);
    const Vec2 b2(sk.beta_x, sk.beta_y);

    const Mat2 L = cov.llt().matrixL();
    const Mat2 Linv = L.inverse();
    // In the whitened frame z = L^-1 y the density is 2 phi(z) Phi((L^T b)^T z).
    const Vec2 bw = L.transpose() * b2;

    const double w = 2.0 * kRange / kBins;
    std::vector<double> exact(kBins * kBins + 1, 0.0);
    double inside = 0.0;
    for (int by = 0; by < kBins; ++by)
        for (int bx = 0; bx < kBins; ++bx) {
            double m = 0.0;
            for (int sy = 0; sy < kSub; ++sy)
                for (int sx = 0; sx < kSub; ++sx) {
                    const double zx = -kRange + w * (bx + (sx + 0.5) / kSub);
                    const double zy = -kRange + w * (by + (sy + 0.5) / kSub);
                    const double phi = std::exp(-0.5 * (zx * zx + zy * zy)) / (2.0 * kernel::kPi);
                    m += 2.0 * phi * kernel::phi_std(bw.x() * zx + bw.y() * zy);
                }
            m *= (w / kSub) * (w / kSub);
            exact[by * kBins + bx] = m;
            inside += m;
        }
    exact[kBins * kBins] = std::max(0.0, 1.0 - inside);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    const Mat3 A = c.sigma.llt().matrixL();
    const double sd = std::sqrt(dilation);
    std::vector<double> hist(kBins * kBins + 1, 0.0);
    for (std::size_t i = 0; i < samples; ++i) {
        Vec3 x = A * Vec3(n(rng), n(rng), n(rng));
        if (n(rng) > c.beta.dot(x)) x = -x;
        Vec2 y = c.T * x;
        if (dilation > 0.0) y += sd * Vec2(n(rng), n(rng));
        const Vec2 z = Linv * y;
        const int bx = static_cast<int>(std::floor((z.x() + kRange) / w));
        const int by = static_cast<int>(std::floor((z.y() + kRange) / w));
        if (bx < 0 || by < 0 || bx >= kBins || by >= kBins)
            hist[kBins * kBins] += 1.0;
        else
            hist[by * kBins + bx] += 1.0;
    }
    double l1 = 0.0;
    for (std::size_t k = 0; k < hist.size(); ++k) l1 += std::abs(hist[k] / samples - exact[k]);
    return l1;
}

}  // namespace skewsplat::testing
