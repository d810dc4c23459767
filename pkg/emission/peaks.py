"""
Spectral Peak Analysis

Peak positions, heights and full widths at half maximum of emission spectra.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy.signal import find_peaks as _find_peak_indices

from .errors import DomainError
from .types import Peak, PeakReport, SpectrumResult

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.05


def _half_max_crossing(frequencies, values, index: int, half: float, step: int) -> Optional[float]:
    """Frequency where the spectrum first drops below half walking from index in direction step"""
    j = index
    while 0 <= j + step < len(values):
        nxt = j + step
        if values[nxt] < half:
            # linear interpolation between j (>= half) and nxt (< half)
            fraction = (values[j] - half) / (values[j] - values[nxt])
            return float(frequencies[j] + fraction * (frequencies[nxt] - frequencies[j]))
        j = nxt
    return None


def find_peaks(spectrum: SpectrumResult, threshold: float = DEFAULT_THRESHOLD) -> List[Peak]:
    """Local maxima above threshold * global maximum, with linearly interpolated FWHM"""
    if not 0.0 < threshold < 1.0:
        raise DomainError(f"peak threshold must lie in (0, 1), got {threshold}")
    values = spectrum.values
    frequencies = spectrum.frequencies
    top = float(values.max()) if values.size else 0.0
    if top <= 0.0:
        logger.warning(f"Flat {spectrum.method.value} spectrum: no peaks")
        return []

    indices, _ = _find_peak_indices(values, height=threshold * top)
    peaks = []
    for index in indices:
        height = float(values[index])
        half = 0.5 * height
        left = _half_max_crossing(frequencies, values, index, half, -1)
        right = _half_max_crossing(frequencies, values, index, half, +1)
        fwhm = right - left if left is not None and right is not None else None
        if fwhm is None:
            logger.debug(f"Peak at {frequencies[index]:.4f} has no half-maximum crossing on one side")
        peaks.append(Peak(position=float(frequencies[index]), height=height, fwhm=fwhm))

    if not peaks:
        logger.warning(f"No peaks above {threshold:.0%} of the maximum in {spectrum.method.value} spectrum")
    return peaks


def compare(
    spectra: Sequence[SpectrumResult],
    threshold: float = DEFAULT_THRESHOLD,
    labels: Optional[Sequence[str]] = None,
) -> List[PeakReport]:
    """Peak report for each spectrum"""
    if not spectra:
        raise DomainError("compare needs at least one spectrum")
    if labels is None:
        labels = [str(s.metadata.get("label", s.method.value)) for s in spectra]
    if len(labels) != len(spectra):
        raise DomainError("one label per spectrum is required")

    reports = []
    for spectrum, label in zip(spectra, labels):
        peaks = find_peaks(spectrum, threshold)
        logger.info(f"{label}: {len(peaks)} peak(s)")
        reports.append(PeakReport(method=spectrum.method, label=label, peaks=peaks))
    return reports


def peak_widths_by_position(peaks: Sequence[Peak]) -> List[Optional[float]]:
    """FWHMs ordered from the lowest to the highest peak frequency"""
    return [p.fwhm for p in sorted(peaks, key=lambda p: p.position)]


def main_peaks(peaks: Sequence[Peak], count: int = 2) -> List[Peak]:
    """The `count` highest peaks, returned in order of position"""
    highest = sorted(peaks, key=lambda p: p.height, reverse=True)[:count]
    return sorted(highest, key=lambda p: p.position)
