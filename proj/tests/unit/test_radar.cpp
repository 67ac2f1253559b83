#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "isacfusion/fileio.hpp"
#include "isacfusion/radar.hpp"
#include "isacfusion/sim.hpp"
#include "oracles.hpp"

using namespace isac;
using namespace isac::radar;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

WaveformConfig small_waveform(int g, int h) {
    WaveformConfig wf;
    wf.num_symbols = g;
    wf.num_subcarriers = h;
    return wf;
}

// Tone at integer (range bin, Doppler bin).
CsiMatrix tone(int g, int h, int range_bin, int doppler_bin, double amplitude = 1.0) {
    CsiMatrix c{ComplexMatrix(g, h)};
    for (int s = 0; s < g; ++s) {
        for (int k = 0; k < h; ++k) {
            const double phase = -kTwoPi * k * range_bin / h + kTwoPi * s * doppler_bin / g;
            c.z(s, k) = std::polar(amplitude, phase);
        }
    }
    return c;
}

CsiMatrix random_csi(int g, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    CsiMatrix c{ComplexMatrix(g, h)};
    for (Eigen::Index i = 0; i < c.z.size(); ++i) c.z.data()[i] = {n(rng), n(rng)};
    return c;
}

std::pair<Eigen::Index, Eigen::Index> argmax(const RealMatrix& m) {
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    m.maxCoeff(&r, &c);
    return {r, c};
}

}  // namespace

TEST(ComputeCsi, IdentityAndDivision) {
    OfdmFrame f;
    f.tx = random_csi(3, 4, 1).z;
    f.rx = f.tx;
    const auto z = compute_csi(f).z;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        EXPECT_NEAR(std::abs(z.data()[i] - Complex(1.0, 0.0)), 0.0, 1e-15);
    }

    f.tx = ComplexMatrix::Ones(3, 4);
    f.rx = random_csi(3, 4, 2).z;
    EXPECT_EQ(compute_csi(f).z, f.rx);

    OfdmFrame two;
    two.tx = ComplexMatrix::Ones(2, 2);
    two.rx.resize(2, 2);
    two.rx << Complex(2, 0), Complex(0, 0), Complex(0, 0), Complex(0, 2);
    EXPECT_EQ(compute_csi(two).z, two.rx);
}

TEST(ComputeCsi, RejectsZeroTransmitSymbolAndShapeMismatch) {
    OfdmFrame f;
    f.tx = ComplexMatrix::Ones(2, 3);
    f.rx = ComplexMatrix::Ones(2, 3);
    f.tx(1, 2) = 0.0;
    try {
        compute_csi(f);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("(1, 2)"), std::string::npos);
    }
    f.tx = ComplexMatrix::Ones(2, 2);
    EXPECT_THROW(compute_csi(f), ValidationError);
}

TEST(RangeDoppler, MatchesNaiveDft) {
    for (auto [g, h] : {std::pair{8, 16}, std::pair{7, 12}, std::pair{5, 9}}) {
        const auto csi = random_csi(g, h, static_cast<std::uint64_t>(g * 100 + h));
        const auto fast = range_doppler_spectrum(csi);
        const auto ref = oracle::naive_spectrum(csi.z);
        const auto map = range_doppler(csi, small_waveform(g, h));
        for (Eigen::Index r = 0; r < g; ++r) {
            for (Eigen::Index c = 0; c < h; ++c) {
                EXPECT_NEAR(std::abs(fast(r, c) - ref(r, c)), 0.0, 1e-12);
                EXPECT_NEAR(map.magnitudes(r, c), std::abs(ref(r, c)), 1e-12);
            }
        }
    }
}

TEST(RangeDoppler, PureDelayTonePeaksAtRangeBin) {
    const int g = 16;
    const int h = 64;
    const auto map = range_doppler(tone(g, h, 4, 0), small_waveform(g, h));
    const auto [r, c] = argmax(map.magnitudes);
    EXPECT_EQ(c, 4);
    EXPECT_EQ(map.doppler_bin(r), 0);
    EXPECT_NEAR(map.magnitudes(r, c), g, 1e-9);
}

TEST(RangeDoppler, ConstantCsiIsDc) {
    const int g = 10;
    const int h = 20;
    CsiMatrix c{ComplexMatrix::Constant(g, h, Complex(2.0, -1.0))};
    const auto map = range_doppler(c, small_waveform(g, h));
    const auto [r, col] = argmax(map.magnitudes);
    EXPECT_EQ(col, 0);
    EXPECT_EQ(map.doppler_bin(r), 0);
    EXPECT_NEAR(map.magnitudes.sum(), map.magnitudes(r, col), 1e-9);
}

TEST(RangeDoppler, ParsevalWithDocumentedNormalization) {
    const int g = 12;
    const int h = 30;
    const auto csi = random_csi(g, h, 9);
    const auto map = range_doppler(csi, small_waveform(g, h));
    const double lhs = map.magnitudes.array().square().sum();
    const double rhs = static_cast<double>(g) / h * csi.z.cwiseAbs2().sum();
    EXPECT_NEAR(lhs, rhs, 1e-10 * rhs);
}

TEST(RangeDoppler, Linearity) {
    const int g = 9;
    const int h = 14;
    const auto csi = random_csi(g, h, 10);
    const Complex a(-1.5, 2.0);
    const auto base = range_doppler(csi, small_waveform(g, h));
    const auto scaled = range_doppler(CsiMatrix{csi.z * a}, small_waveform(g, h));
    EXPECT_LT((scaled.magnitudes - std::abs(a) * base.magnitudes).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RangeDoppler, DelayShiftMovesRangeBins) {
    const int g = 8;
    const int h = 24;
    const auto csi = random_csi(g, h, 11);
    const auto base = range_doppler(csi, small_waveform(g, h));
    for (int k : {1, 5, 23, 30}) {
        CsiMatrix shifted = csi;
        for (int s = 0; s < g; ++s) {
            for (int n = 0; n < h; ++n) shifted.z(s, n) *= std::polar(1.0, -kTwoPi * n * k / h);
        }
        const auto moved = range_doppler(shifted, small_waveform(g, h));
        for (int r = 0; r < g; ++r) {
            for (int n = 0; n < h; ++n) {
                EXPECT_NEAR(moved.magnitudes(r, ((n + k) % h + h) % h), base.magnitudes(r, n), 1e-12);
            }
        }
    }
}

TEST(RangeDoppler, RejectsShapeMismatch) {
    EXPECT_THROW(range_doppler(random_csi(4, 4, 1), small_waveform(4, 5)), ValidationError);
}

TEST(ClutterFilter, StaticSceneResidualVanishes) {
    const auto frame = random_csi(6, 10, 12);
    ClutterFilter f({0.1, 0});
    CsiMatrix last;
    for (int i = 0; i < 50; ++i) last = f.apply(frame);
    EXPECT_LT(last.z.norm(), 1e-6 * frame.z.norm());
}

TEST(ClutterFilter, AlphaOneIsFrameDifference) {
    std::vector<CsiMatrix> frames;
    for (int i = 0; i < 5; ++i) frames.push_back(random_csi(4, 6, 20 + i));
    ClutterFilter f({1.0, 0});
    f.apply(frames[0]);
    for (int i = 1; i < 5; ++i) {
        const auto out = f.apply(frames[i]);
        EXPECT_LT((out.z - (frames[i].z - frames[i - 1].z)).cwiseAbs().maxCoeff(), 1e-15);
    }
    const auto again = remove_clutter(std::span(frames).first(4), frames[4], {1.0, 0});
    EXPECT_LT((again.z - (frames[4].z - frames[3].z)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ClutterFilter, BootstrapFramesPassThrough) {
    ClutterFilter f({0.1, 3});
    for (int i = 0; i < 3; ++i) {
        const auto in = random_csi(3, 3, 30 + i);
        EXPECT_EQ(f.apply(in).z, in.z);
    }
    const auto in = random_csi(3, 3, 40);
    EXPECT_NE(f.apply(in).z, in.z);
    EXPECT_EQ(f.frames_seen(), 4);
}

TEST(ClutterFilter, RejectsBadConfigAndShapes) {
    EXPECT_THROW(ClutterFilter({0.0, 0}), ValidationError);
    EXPECT_THROW(ClutterFilter({1.5, 0}), ValidationError);
    ClutterFilter f({0.5, 0});
    f.apply(random_csi(3, 3, 1));
    EXPECT_THROW(f.apply(random_csi(3, 4, 1)), ValidationError);
}

TEST(ClutterFilter, SuppressesStaticClutterKeepsMovingTarget) {
    const WaveformConfig wf;
    const double dt = 1.0 / 33.0;
    const double v = 1.0;
    const double clutter_range = 8.0;
    const auto clutter = sim::point_target_csi(clutter_range, 0.0, wf, 3.0);
    ClutterFilter f({0.1, 5});
    CsiMatrix out;
    double r = 0.0;
    for (int i = 0; i < 50; ++i) {
        r = 4.0 - v * dt * i;
        const auto target = sim::point_target_csi(r, v, wf, 1.0);
        out = f.apply(CsiMatrix{target.z + clutter.z});
    }
    const auto filtered = range_doppler(out, wf);
    const auto clutter_only = range_doppler(clutter, wf);
    const auto target_only = range_doppler(sim::point_target_csi(r, v, wf, 1.0), wf);

    const auto [cr, cc] = argmax(clutter_only.magnitudes);
    const auto [tr, tc] = argmax(target_only.magnitudes);
    const double suppression_db =
        20.0 * std::log10(clutter_only.magnitudes(cr, cc) / filtered.magnitudes(cr, cc));
    EXPECT_GE(suppression_db, 20.0);
    EXPECT_GE(filtered.magnitudes(tr, tc), 0.9 * target_only.magnitudes(tr, tc));
}

TEST(Detect, SingleToneGivesOneDetectionAtBin) {
    const int g = 16;
    const int h = 64;
    const auto map = range_doppler(tone(g, h, 7, -3), small_waveform(g, h));
    const auto det = detect(map, {});
    ASSERT_EQ(det.size(), 1u);
    EXPECT_EQ(det[0].range_bin, 7);
    EXPECT_EQ(det[0].doppler_bin, -3);
    EXPECT_NEAR(det[0].r, 7 * map.range_bin_width, 1e-9);
    EXPECT_NEAR(det[0].v_d, -3 * map.doppler_bin_width, 1e-9);
}

TEST(Detect, AllZeroMapHasNoDetections) {
    RangeDopplerMap map;
    map.magnitudes = RealMatrix::Zero(8, 8);
    map.range_bin_width = 1.0;
    map.doppler_bin_width = 1.0;
    EXPECT_TRUE(detect(map, {}).empty());
}

TEST(Detect, TwoSeparatedTonesSortedByBin) {
    const int g = 16;
    const int h = 64;
    CsiMatrix c = tone(g, h, 30, 2);
    c.z += tone(g, h, 5, -4).z;
    const auto det = detect(range_doppler(c, small_waveform(g, h)), {});
    ASSERT_EQ(det.size(), 2u);
    EXPECT_EQ(det[0].range_bin, 5);
    EXPECT_EQ(det[0].doppler_bin, -4);
    EXPECT_EQ(det[1].range_bin, 30);
    EXPECT_EQ(det[1].doppler_bin, 2);
}

TEST(Detect, OutputSortedAndAboveThreshold) {
    const int g = 12;
    const int h = 40;
    const auto map = range_doppler(random_csi(g, h, 50), small_waveform(g, h));
    DetectorConfig cfg;
    cfg.threshold = 1.5;
    const auto det = detect(map, cfg);
    ASSERT_FALSE(det.empty());
    std::vector<double> mags(map.magnitudes.data(), map.magnitudes.data() + map.magnitudes.size());
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
    for (std::size_t i = 0; i < det.size(); ++i) {
        EXPECT_GT(det[i].magnitude, cfg.threshold * mags[mags.size() / 2] * 0.999);
        EXPECT_LE(std::abs(det[i].r - det[i].range_bin * map.range_bin_width),
                  0.5 * map.range_bin_width + 1e-12);
        if (i > 0) {
            EXPECT_LT(std::pair(det[i - 1].range_bin, det[i - 1].doppler_bin),
                      std::pair(det[i].range_bin, det[i].doppler_bin));
        }
    }
}

TEST(Detect, RejectsNonPositiveThreshold) {
    RangeDopplerMap map;
    map.magnitudes = RealMatrix::Ones(2, 2);
    DetectorConfig cfg;
    cfg.threshold = 0.0;
    EXPECT_THROW(detect(map, cfg), ValidationError);
}

TEST(ProcessFrame, NoiselessTargetAtThreeMetres) {
    const WaveformConfig wf;
    OfdmFrame frame;
    frame.tx = ComplexMatrix::Constant(wf.symbols(), wf.subcarriers(), Complex(0.0, 1.0));
    frame.rx = sim::point_target_csi(3.0, 0.4, wf).z.cwiseProduct(frame.tx);
    ClutterFilter clutter;
    const auto det = process_frame(frame, clutter, wf, {});
    ASSERT_EQ(det.size(), 1u);
    EXPECT_LE(std::abs(det[0].r - 3.0), wf.range_bin_width());
    EXPECT_LE(std::abs(det[0].v_d - 0.4), wf.doppler_bin_width());
}

TEST(Waveform, DefaultsAndBinWidths) {
    const WaveformConfig wf;
    EXPECT_EQ(wf.symbols(), 330);
    EXPECT_EQ(wf.subcarriers(), 1666);
    EXPECT_NEAR(wf.range_bin_width(), kSpeedOfLight / (2.0 * 1666 * 120e3), 1e-15);
    EXPECT_LE(wf.range_bin_width(), 0.75);
    EXPECT_NEAR(wf.doppler_bin_width(), 1.99, 0.01);
    EXPECT_NO_THROW(wf.validate());
    WaveformConfig bad;
    bad.num_subcarriers = 2000;
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(CsiDump, RoundTripAndHeader) {
    const auto dir = std::filesystem::temp_directory_path() / "isacfusion_csi_dump";
    std::filesystem::create_directories(dir);
    const auto path = dir / "frame.bin";
    CsiMatrix c{ComplexMatrix(3, 5)};
    for (Eigen::Index i = 0; i < c.z.size(); ++i) {
        c.z.data()[i] = {0.25 * static_cast<double>(i), -0.5 * static_cast<double>(i)};
    }
    write_csi_dump(path, c);
    const auto bytes = read_file(path);
    ASSERT_EQ(bytes.size(), 16u + 15u * 8u);
    EXPECT_EQ(bytes.substr(0, 4), "CSI1");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 3);
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 5);
    EXPECT_EQ(read_csi_dump(path).z, c.z);

    std::ofstream(dir / "bad.bin", std::ios::binary) << "XXXX";
    EXPECT_THROW(read_csi_dump(dir / "bad.bin"), ValidationError);
    std::filesystem::remove_all(dir);
}
