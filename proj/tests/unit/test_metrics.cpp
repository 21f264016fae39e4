#include <skewsplat/image.hpp>
#include <skewsplat/metrics.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace skewsplat;

namespace {

Image noise_image(int w, int h, std::uint64_t seed, double lo = 0.1, double hi = 0.9) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h);
    for (double& v : img.data) v = u(rng);
    return img;
}

}  // namespace

TEST(Metrics, IdenticalImagesHitTheCap) {
    const Image a = noise_image(20, 13, 1);
    const auto m = compare(a, a);
    EXPECT_EQ(m.psnr, kPsnrCap);
    EXPECT_DOUBLE_EQ(m.ssim, 1.0);
}

TEST(Metrics, UniformOffsetGivesTwentyDecibels) {
    const Image a = noise_image(16, 16, 2, 0.1, 0.8);
    Image b = a;
    for (double& v : b.data) v += 0.1;
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
    EXPECT_NEAR(mse(a, b), 0.01, 1e-15);
    EXPECT_NEAR(mean_abs_error(a, b), 0.1, 1e-15);
}

TEST(Metrics, SsimIsSymmetricAndBounded) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Image a = noise_image(24, 18, 10 + s), b = noise_image(24, 18, 20 + s);
        const double ab = ssim(a, b), ba = ssim(b, a);
        EXPECT_EQ(ab, ba);
        EXPECT_LT(ab, 1.0);
        EXPECT_GT(ab, -1.0);
    }
}

TEST(Metrics, SsimGradientMatchesFiniteDifferences) {
    Image a = noise_image(14, 12, 3);
    const Image b = noise_image(14, 12, 4);
    std::vector<double> g;
    ssim_with_grad(a, b, g);
    ASSERT_EQ(g.size(), a.data.size());
    const double h = 1e-6;
    for (std::size_t i = 0; i < a.data.size(); i += 7) {
        const double v = a.data[i];
        a.data[i] = v + h;
        const double up = ssim(a, b);
        a.data[i] = v - h;
        const double dn = ssim(a, b);
        a.data[i] = v;
        EXPECT_NEAR(g[i], (up - dn) / (2 * h), 1e-7) << i;
    }
}

TEST(Metrics, DimensionMismatchThrows) {
    try {
        psnr(Image(4, 4), Image(4, 5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
    EXPECT_THROW(ssim(Image(3, 3), Image(2, 3)), Error);
}

TEST(Image, Rgb8QuantizationRoundsAndClamps) {
    EXPECT_EQ(quantize_channel(-0.5), 0);
    EXPECT_EQ(quantize_channel(2.0), 255);
    EXPECT_EQ(quantize_channel(0.5), 128);
    EXPECT_EQ(quantize_channel(100.4 / 255.0), 100);
}

TEST(Image, PngRoundTripIsLossless) {
    Image a = noise_image(9, 7, 5, 0.0, 1.0);
    const auto rgb = to_rgb8(a);
    const Image b = decode_png(encode_png(a));
    EXPECT_EQ(to_rgb8(b), rgb);
    EXPECT_EQ(b.width, 9);
    EXPECT_EQ(b.height, 7);
}

TEST(Image, BadPngIsAnError) {
    const std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5};
    EXPECT_THROW(decode_png(junk), Error);
    EXPECT_THROW(load_png("/nonexistent/file.png"), Error);
}
