#pragma once

// OFDM radar processing: CSI formation, range-Doppler periodogram, clutter
// removal and threshold detection.
//
// Matrices are G x H (OFDM symbols x subcarriers), row-major. The Doppler
// axis of a RangeDopplerMap is centred: row floor(G/2) is zero Doppler and
// positive Doppler bins mean an approaching target. Transforms are an
// unnormalized forward DFT over symbols and a 1/H-scaled inverse DFT over
// subcarriers, so sum|map|^2 = (G/H) * sum|Z|^2.

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "isacfusion/core.hpp"

namespace isac::radar {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct WaveformConfig {
    double center_frequency = 27.4e9;  ///< Hz
    double bandwidth = 200e6;          ///< Hz
    double subcarrier_spacing = 120e3; ///< Hz
    int num_symbols = 330;             ///< G
    int num_subcarriers = 0;           ///< H; 0 selects floor(bandwidth / subcarrier_spacing)

    int symbols() const { return num_symbols; }
    int subcarriers() const;
    /// No cyclic prefix: T_sym = 1 / subcarrier_spacing.
    double symbol_time() const { return 1.0 / subcarrier_spacing; }
    double range_bin_width() const;
    double doppler_bin_width() const;
    /// c / (2 * subcarrier_spacing)
    double max_unambiguous_range() const;

    void validate() const;
};

struct OfdmFrame {
    ComplexMatrix tx;  ///< U
    ComplexMatrix rx;  ///< V
};

struct CsiMatrix {
    ComplexMatrix z;

    Eigen::Index symbols() const { return z.rows(); }
    Eigen::Index subcarriers() const { return z.cols(); }
};

struct RangeDopplerMap {
    RealMatrix magnitudes;  ///< rows: centred Doppler bins, cols: range bins
    double range_bin_width = 0.0;
    double doppler_bin_width = 0.0;

    Eigen::Index zero_doppler_row() const { return magnitudes.rows() / 2; }
    int doppler_bin(Eigen::Index row) const { return static_cast<int>(row - zero_doppler_row()); }
};

struct Detection {
    int range_bin = 0;
    int doppler_bin = 0;
    double magnitude = 0.0;
    double r = 0.0;    ///< m, sub-bin refined, within half a bin of range_bin
    double v_d = 0.0;  ///< m/s, sub-bin refined

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Z = V ./ U. Throws ValidationError on shape mismatch or a zero in U.
CsiMatrix compute_csi(const OfdmFrame& frame);

/// H length-G FFTs down the columns (then Doppler centring), G length-H
/// IFFTs along the rows, then element magnitudes.
RangeDopplerMap range_doppler(const CsiMatrix& csi, const WaveformConfig& wf);

/// Complex range-Doppler spectrum before taking magnitudes (same layout).
ComplexMatrix range_doppler_spectrum(const CsiMatrix& csi);

struct ClutterConfig {
    double alpha = 0.1;     ///< EMA smoothing factor in (0, 1]
    int bootstrap_frames = 5;
};

/// Exponential-moving-average background subtraction in the CSI domain.
///
/// The background starts as the first frame. Each later frame returns
/// Z - B (the background before this frame) and then updates
/// B <- (1 - alpha) B + alpha Z. The first `bootstrap_frames` frames are
/// returned unmodified.
class ClutterFilter {
public:
    explicit ClutterFilter(ClutterConfig cfg = {});

    CsiMatrix apply(const CsiMatrix& current);

    const ClutterConfig& config() const { return cfg_; }
    long frames_seen() const { return frames_; }
    void reset();

private:
    ClutterConfig cfg_;
    std::optional<ComplexMatrix> background_;
    long frames_ = 0;
};

/// Replays `history` through a fresh ClutterFilter and applies it to `current`.
CsiMatrix remove_clutter(std::span<const CsiMatrix> history, const CsiMatrix& current,
                         ClutterConfig cfg);

struct DetectorConfig {
    double threshold = 12.0;     ///< multiple of the map's median magnitude
    double floor_ratio = 1e-6;   ///< ignore peaks below this fraction of the map maximum
};

/// Local maxima (strictly above all 8 circular neighbours) whose magnitude
/// exceeds threshold * median. Output sorted by (range_bin, doppler_bin).
std::vector<Detection> detect(const RangeDopplerMap& map, const DetectorConfig& cfg);

/// compute_csi -> clutter.apply -> range_doppler -> detect
std::vector<Detection> process_frame(const OfdmFrame& frame, ClutterFilter& clutter,
                                     const WaveformConfig& wf, const DetectorConfig& det);

/// Same pipeline starting from an already formed CSI matrix.
std::vector<Detection> process_csi(const CsiMatrix& csi, ClutterFilter& clutter,
                                   const WaveformConfig& wf, const DetectorConfig& det);

/// Binary CSI dump: "CSI1", G, H, reserved (uint32 LE each), then G*H
/// little-endian complex64 (re, im) pairs in row-major order.
void write_csi_dump(const std::filesystem::path& path, const CsiMatrix& csi);
CsiMatrix read_csi_dump(const std::filesystem::path& path);

}  // namespace isac::radar
