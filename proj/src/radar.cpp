#include "isacfusion/radar.hpp"

#include <fftw3.h>
#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <utility>

#include "isacfusion/fileio.hpp"

namespace isac::radar {
namespace {

static_assert(sizeof(Complex) == sizeof(fftw_complex));

// In-place plans for a G x H row-major complex buffer.
class FftPlans {
public:
    FftPlans(int g, int h) {
        ComplexMatrix scratch(g, h);
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        // H transforms of length G down the columns (stride H, distance 1).
        doppler_ = fftw_plan_many_dft(1, &g, h, buf, nullptr, h, 1, buf, nullptr, h, 1,
                                      FFTW_FORWARD, flags);
        // G transforms of length H along the rows (stride 1, distance H).
        range_ = fftw_plan_many_dft(1, &h, g, buf, nullptr, 1, h, buf, nullptr, 1, h,
                                    FFTW_BACKWARD, flags);
    }
    ~FftPlans() {
        fftw_destroy_plan(doppler_);
        fftw_destroy_plan(range_);
    }
    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;

    void run(ComplexMatrix& m) const {
        auto* buf = reinterpret_cast<fftw_complex*>(m.data());
        fftw_execute_dft(doppler_, buf, buf);
        fftw_execute_dft(range_, buf, buf);
    }

private:
    fftw_plan doppler_ = nullptr;
    fftw_plan range_ = nullptr;
};

const FftPlans& plans_for(int g, int h) {
    thread_local std::map<std::pair<int, int>, std::unique_ptr<FftPlans>> cache;
    auto& slot = cache[{g, h}];
    if (!slot) slot = std::make_unique<FftPlans>(g, h);
    return *slot;
}

void check_same_shape(const ComplexMatrix& a, const ComplexMatrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ValidationError(fmt::format("{}: shape {}x{} does not match {}x{}", what, a.rows(),
                                          a.cols(), b.rows(), b.cols()));
    }
}

double median_of(const RealMatrix& m) {
    std::vector<double> v(m.data(), m.data() + m.size());
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

// Offset of the true peak from bin centre for an unwindowed DFT (Dirichlet
// kernel): delta = |X[k+1]| / (|X[k]| + |X[k+1]|) using the larger neighbour.
double subbin_offset(double left, double centre, double right) {
    if (right >= left) {
        const double den = centre + right;
        return den > 0.0 ? std::min(0.5, right / den) : 0.0;
    }
    const double den = centre + left;
    return den > 0.0 ? -std::min(0.5, left / den) : 0.0;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
    }
    return v;
}

}  // namespace

int WaveformConfig::subcarriers() const {
    if (num_subcarriers > 0) return num_subcarriers;
    return static_cast<int>(std::floor(bandwidth / subcarrier_spacing));
}

double WaveformConfig::range_bin_width() const {
    return kSpeedOfLight / (2.0 * subcarriers() * subcarrier_spacing);
}

double WaveformConfig::doppler_bin_width() const {
    return kSpeedOfLight / (2.0 * center_frequency * num_symbols * symbol_time());
}

double WaveformConfig::max_unambiguous_range() const {
    return kSpeedOfLight / (2.0 * subcarrier_spacing);
}

void WaveformConfig::validate() const {
    if (!(center_frequency > 0.0) || !(bandwidth > 0.0) || !(subcarrier_spacing > 0.0)) {
        throw ValidationError("waveform: frequencies must be positive");
    }
    if (num_symbols < 2) throw ValidationError("waveform: need at least 2 OFDM symbols");
    if (subcarriers() < 2) throw ValidationError("waveform: need at least 2 subcarriers");
    if (subcarriers() * subcarrier_spacing > bandwidth * (1.0 + 1e-12)) {
        throw ValidationError(fmt::format("waveform: {} subcarriers x {} Hz exceed bandwidth {} Hz",
                                          subcarriers(), subcarrier_spacing, bandwidth));
    }
}

CsiMatrix compute_csi(const OfdmFrame& frame) {
    check_same_shape(frame.tx, frame.rx, "compute_csi");
    for (Eigen::Index g = 0; g < frame.tx.rows(); ++g) {
        for (Eigen::Index h = 0; h < frame.tx.cols(); ++h) {
            if (frame.tx(g, h) == Complex(0.0, 0.0)) {
                throw ValidationError(
                    fmt::format("compute_csi: zero transmit symbol at ({}, {})", g, h));
            }
        }
    }
    return {frame.rx.cwiseQuotient(frame.tx)};
}

ComplexMatrix range_doppler_spectrum(const CsiMatrix& csi) {
    const auto g = static_cast<int>(csi.symbols());
    const auto h = static_cast<int>(csi.subcarriers());
    ComplexMatrix work = csi.z;
    plans_for(g, h).run(work);

    // Centre the Doppler axis: output row r holds DFT bin (r - g/2) mod g.
    ComplexMatrix out(g, h);
    const int zero_row = g / 2;
    const double scale = 1.0 / static_cast<double>(h);
    for (int r = 0; r < g; ++r) {
        const int k = ((r - zero_row) % g + g) % g;
        out.row(r) = work.row(k) * scale;
    }
    return out;
}

RangeDopplerMap range_doppler(const CsiMatrix& csi, const WaveformConfig& wf) {
    if (csi.symbols() != wf.symbols() || csi.subcarriers() != wf.subcarriers()) {
        throw ValidationError(fmt::format("range_doppler: CSI is {}x{} but waveform is {}x{}",
                                          csi.symbols(), csi.subcarriers(), wf.symbols(),
                                          wf.subcarriers()));
    }
    const auto g = static_cast<int>(csi.symbols());
    const auto h = static_cast<int>(csi.subcarriers());
    ComplexMatrix work = csi.z;
    plans_for(g, h).run(work);

    RangeDopplerMap map;
    map.magnitudes.resize(g, h);
    const int zero_row = g / 2;
    const double scale = 1.0 / static_cast<double>(h);
    for (int r = 0; r < g; ++r) {
        const int k = ((r - zero_row) % g + g) % g;
        const Complex* src = work.data() + static_cast<std::ptrdiff_t>(k) * h;
        double* dst = map.magnitudes.data() + static_cast<std::ptrdiff_t>(r) * h;
        for (int c = 0; c < h; ++c) {
            const double re = src[c].real();
            const double im = src[c].imag();
            dst[c] = std::sqrt(re * re + im * im) * scale;
        }
    }
    map.range_bin_width = wf.range_bin_width();
    map.doppler_bin_width = wf.doppler_bin_width();
    return map;
}

ClutterFilter::ClutterFilter(ClutterConfig cfg) : cfg_(cfg) {
    if (!(cfg_.alpha > 0.0 && cfg_.alpha <= 1.0)) {
        throw ValidationError(fmt::format("clutter alpha {} outside (0, 1]", cfg_.alpha));
    }
    if (cfg_.bootstrap_frames < 0) {
        throw ValidationError("clutter bootstrap_frames must be non-negative");
    }
}

void ClutterFilter::reset() {
    background_.reset();
    frames_ = 0;
}

CsiMatrix ClutterFilter::apply(const CsiMatrix& current) {
    const long n = frames_++;
    if (!background_) {
        background_ = current.z;
        if (n < cfg_.bootstrap_frames) return current;
        return {ComplexMatrix::Zero(current.z.rows(), current.z.cols())};
    }
    check_same_shape(*background_, current.z, "remove_clutter");
    CsiMatrix residual{ComplexMatrix(current.z.rows(), current.z.cols())};
    const double keep = 1.0 - cfg_.alpha;
    Complex* b = background_->data();
    const Complex* z = current.z.data();
    Complex* res = residual.z.data();
    for (Eigen::Index i = 0; i < current.z.size(); ++i) {
        res[i] = z[i] - b[i];
        b[i] = keep * b[i] + cfg_.alpha * z[i];
    }
    if (n < cfg_.bootstrap_frames) return current;
    return residual;
}

CsiMatrix remove_clutter(std::span<const CsiMatrix> history, const CsiMatrix& current,
                         ClutterConfig cfg) {
    ClutterFilter filter(cfg);
    for (const auto& frame : history) {
        filter.apply(frame);
    }
    return filter.apply(current);
}

std::vector<Detection> detect(const RangeDopplerMap& map, const DetectorConfig& cfg) {
    if (!(cfg.threshold > 0.0)) {
        throw ValidationError("detect: threshold must be positive");
    }
    const auto& m = map.magnitudes;
    std::vector<Detection> out;
    if (m.size() == 0) return out;

    const double level = std::max(cfg.threshold * median_of(m), cfg.floor_ratio * m.maxCoeff());
    const Eigen::Index rows = m.rows();
    const Eigen::Index cols = m.cols();
    auto at = [&](Eigen::Index r, Eigen::Index c) {
        return m((r + rows) % rows, (c + cols) % cols);
    };

    // Row-major scan over (doppler, range); sorted afterwards.
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double v = m(r, c);
            if (!(v > level)) continue;
            bool is_peak = true;
            for (int dr = -1; dr <= 1 && is_peak; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const Eigen::Index nr = (r + dr + rows) % rows;
                    const Eigen::Index nc = (c + dc + cols) % cols;
                    if (nr == r && nc == c) continue;
                    if (!(v > m(nr, nc))) {
                        is_peak = false;
                        break;
                    }
                }
            }
            if (!is_peak) continue;

            const double dr_off = subbin_offset(at(r, c - 1), v, at(r, c + 1));
            const double dd_off = subbin_offset(at(r - 1, c), v, at(r + 1, c));
            Detection d;
            d.range_bin = static_cast<int>(c);
            d.doppler_bin = map.doppler_bin(r);
            d.magnitude = v;
            d.r = (d.range_bin + dr_off) * map.range_bin_width;
            d.v_d = (d.doppler_bin + dd_off) * map.doppler_bin_width;
            out.push_back(d);
        }
    }
    std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        return std::pair(a.range_bin, a.doppler_bin) < std::pair(b.range_bin, b.doppler_bin);
    });
    return out;
}

std::vector<Detection> process_csi(const CsiMatrix& csi, ClutterFilter& clutter,
                                   const WaveformConfig& wf, const DetectorConfig& det) {
    const auto cleaned = clutter.apply(csi);
    return detect(range_doppler(cleaned, wf), det);
}

std::vector<Detection> process_frame(const OfdmFrame& frame, ClutterFilter& clutter,
                                     const WaveformConfig& wf, const DetectorConfig& det) {
    return process_csi(compute_csi(frame), clutter, wf, det);
}

void write_csi_dump(const std::filesystem::path& path, const CsiMatrix& csi) {
    std::string out;
    out.reserve(16 + static_cast<std::size_t>(csi.z.size()) * 8);
    out += "CSI1";
    put_u32(out, static_cast<std::uint32_t>(csi.symbols()));
    put_u32(out, static_cast<std::uint32_t>(csi.subcarriers()));
    put_u32(out, 0);
    for (Eigen::Index i = 0; i < csi.z.size(); ++i) {
        const auto c = csi.z.data()[i];
        for (float f : {static_cast<float>(c.real()), static_cast<float>(c.imag())}) {
            put_u32(out, std::bit_cast<std::uint32_t>(f));
        }
    }
    write_file_atomic(path, out);
}

CsiMatrix read_csi_dump(const std::filesystem::path& path) {
    const auto in = read_file(path);
    if (in.size() < 16 || in.compare(0, 4, "CSI1") != 0) {
        throw ValidationError(fmt::format("{}: not a CSI1 dump", path.string()));
    }
    const auto g = get_u32(in, 4);
    const auto h = get_u32(in, 8);
    const std::size_t expected = 16 + static_cast<std::size_t>(g) * h * 8;
    if (in.size() != expected) {
        throw ValidationError(fmt::format("{}: expected {} bytes for {}x{}, found {}",
                                          path.string(), expected, g, h, in.size()));
    }
    CsiMatrix csi{ComplexMatrix(g, h)};
    std::size_t off = 16;
    for (Eigen::Index i = 0; i < csi.z.size(); ++i, off += 8) {
        const float re = std::bit_cast<float>(get_u32(in, off));
        const float im = std::bit_cast<float>(get_u32(in, off + 4));
        csi.z.data()[i] = Complex(re, im);
    }
    return csi;
}

}  // namespace isac::radar
