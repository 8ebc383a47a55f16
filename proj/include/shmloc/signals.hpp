#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "shmloc/errors.hpp"
#include "shmloc/linalg.hpp"

namespace shmloc::signals {

/// Magnitudes of transmissibility spectral lines for each sensor pair,
/// one measurement repetition. Row p holds |T| for pair p over the
/// frequency grid.
struct TransmissibilityRecord {
    std::size_t pairs = 0;
    std::size_t lines = 0;
    Matrix magnitudes;  // pairs x lines
    Vector freq_grid;   // Hz, length == lines

    bool operator==(const TransmissibilityRecord&) const = default;
};

/// Half-open slice [line_lo, line_hi) of one pair's spectrum.
struct SpectralWindow {
    std::size_t pair_index = 0;
    std::size_t line_lo = 0;
    std::size_t line_hi = 0;

    std::size_t length() const { return line_hi - line_lo; }
    bool operator==(const SpectralWindow&) const = default;
};

/// Relative magnitude floor below which a reference spectrum is treated
/// as degenerate rather than silently amplified.
inline constexpr double kReferenceFloorScale = 1e-12;

/// Element-wise |spec_i / spec_j|. The excitation spectrum cancels in the
/// ratio, so the result depends only on the structure.
inline Vector transmissibility(const ComplexVector& spec_i,
                               const ComplexVector& spec_j) {
    if (spec_i.size() != spec_j.size()) {
        raise(ErrorKind::Precondition, "transmissibility: spectra lengths differ (" +
                                           std::to_string(spec_i.size()) + " vs " +
                                           std::to_string(spec_j.size()) + ")");
    }
    double max_ref = 0.0;
    for (const Complex& z : spec_j) max_ref = std::max(max_ref, std::abs(z));
    if (!(max_ref > 0.0)) {
        raise(ErrorKind::Precondition, "transmissibility: reference spectrum is zero");
    }
    const double floor = kReferenceFloorScale * max_ref;
    Vector out(spec_i.size());
    for (std::size_t k = 0; k < spec_i.size(); ++k) {
        if (std::abs(spec_j[k]) < floor) {
            raise(ErrorKind::DegenerateReference,
                  "transmissibility: reference magnitude below floor at line " +
                      std::to_string(k));
        }
        out[k] = std::abs(spec_i[k] / spec_j[k]);
    }
    return out;
}

/// Copy of the windowed magnitudes; never aliases the record.
inline Vector window_slice(const TransmissibilityRecord& record,
                           const SpectralWindow& w) {
    if (w.line_lo >= w.line_hi) {
        raise(ErrorKind::Precondition, "window_slice: empty window [" +
                                           std::to_string(w.line_lo) + ", " +
                                           std::to_string(w.line_hi) + ")");
    }
    if (w.pair_index >= record.pairs || w.line_hi > record.lines) {
        raise(ErrorKind::Bounds, "window_slice: window out of range for record " +
                                     std::to_string(record.pairs) + "x" +
                                     std::to_string(record.lines));
    }
    Vector out(w.length());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = record.magnitudes(w.pair_index, w.line_lo + k);
    }
    return out;
}

/// Non-overlapping fixed-length windows tiling each pair's spectrum.
/// These form the candidate feature pool the genetic selection works on.
inline std::vector<SpectralWindow> default_window_grid(std::size_t pairs,
                                                       std::size_t lines,
                                                       std::size_t window_len) {
    if (window_len < 2 || window_len > lines) {
        raise(ErrorKind::Precondition,
              "default_window_grid: window_len must be in [2, lines]");
    }
    const std::size_t per_pair = lines / window_len;
    std::vector<SpectralWindow> grid;
    grid.reserve(pairs * per_pair);
    for (std::size_t p = 0; p < pairs; ++p) {
        for (std::size_t w = 0; w < per_pair; ++w) {
            grid.push_back({p, w * window_len, (w + 1) * window_len});
        }
    }
    return grid;
}

} // namespace shmloc::signals
