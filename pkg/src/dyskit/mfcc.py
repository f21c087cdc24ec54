"""MFCC front-end.

Pipeline per frame: pre-emphasis, framing, Hamming window, one-sided power
spectrum, triangular Mel filterbank, natural-log compression and a cosine
transform that starts at coefficient 1 (the energy term is left out).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from dyskit.audio import AudioClip
from dyskit.errors import (
    BadFftSize,
    BandTooNarrow,
    EmptySignal,
    InvalidConfig,
    InvalidLength,
    LengthMismatch,
    NegativeFrequency,
    NegativeMel,
    SignalTooShort,
    TooManyCoefficients,
)


@dataclass(frozen=True)
class FrontendConfig:
    """Front-end parameters.

    ``n_fft=None`` picks the smallest power of two covering one frame and
    ``f_high_hz=None`` means Nyquist; both are resolved per sample rate by
    :meth:`resolve`.
    """

    pre_emphasis_a: float = 0.97
    frame_len_s: float = 0.025
    frame_hop_s: float = 0.010
    n_fft: int | None = None
    n_mel_filters: int = 26
    n_ceps: int = 12
    f_low_hz: float = 0.0
    f_high_hz: float | None = None
    log_floor: float = 1e-10

    def __post_init__(self):
        if not 0.9 <= self.pre_emphasis_a <= 1.0:
            raise InvalidConfig(f"pre_emphasis_a must be in [0.9, 1.0], got {self.pre_emphasis_a}")
        if self.frame_len_s <= 0 or self.frame_hop_s <= 0:
            raise InvalidConfig("frame length and hop must be positive")
        if self.n_mel_filters < 1 or self.n_ceps < 1:
            raise InvalidConfig("n_mel_filters and n_ceps must be positive")
        if self.n_ceps > self.n_mel_filters:
            raise InvalidConfig(f"n_ceps ({self.n_ceps}) exceeds n_mel_filters ({self.n_mel_filters})")
        if self.n_fft is not None and not _is_pow2(self.n_fft):
            raise InvalidConfig(f"n_fft must be a power of two, got {self.n_fft}")
        if self.f_low_hz < 0:
            raise InvalidConfig("f_low_hz must be >= 0")
        if self.log_floor <= 0:
            raise InvalidConfig("log_floor must be positive")

    def frame_length(self, fs: int) -> int:
        return _round_half_up(self.frame_len_s * fs)

    def hop_length(self, fs: int) -> int:
        return _round_half_up(self.frame_hop_s * fs)

    def resolve(self, fs: int) -> "FrontendConfig":
        """Fill in ``n_fft`` and ``f_high_hz`` for sample rate ``fs`` and validate."""
        frame_len = self.frame_length(fs)
        if frame_len < 2 or self.hop_length(fs) < 1:
            raise InvalidConfig(f"frame settings give {frame_len} samples at {fs} Hz")
        n_fft = self.n_fft if self.n_fft is not None else _next_pow2(frame_len)
        if n_fft < frame_len:
            raise BadFftSize(f"n_fft {n_fft} smaller than frame length {frame_len}")
        f_high = self.f_high_hz if self.f_high_hz is not None else fs / 2
        if f_high > fs / 2:
            raise InvalidConfig(f"f_high_hz {f_high} above Nyquist {fs / 2}")
        if self.f_low_hz >= f_high:
            raise InvalidConfig("f_low_hz must be below f_high_hz")
        return replace(self, n_fft=n_fft, f_high_hz=float(f_high))

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {'auto' if value is None else repr(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FrontendConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in types:
                raise InvalidConfig(f"bad config line {line!r}")
            if value == "auto":
                kwargs[key] = None
            elif "int" in str(types[key]):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)

    def snapshot(self) -> str:
        """One-line form used in file headers."""
        return ";".join(line.replace(" ", "") for line in self.to_text().splitlines())

    @classmethod
    def from_snapshot(cls, text: str) -> "FrontendConfig":
        return cls.from_text(text.replace(";", "\n"))


@dataclass(frozen=True, eq=False)
class FrameMatrix:
    frames: np.ndarray
    sample_rate_hz: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_length(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True, eq=False)
class MelFilterBank:
    weights: np.ndarray
    center_freqs_hz: np.ndarray
    edge_bins: np.ndarray

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class MfccMatrix:
    coeffs: np.ndarray
    config: FrontendConfig

    @property
    def n_frames(self) -> int:
        return self.coeffs.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(f"c{i + 1}" for i in range(self.coeffs.shape[1])) + "\n")
        for row in self.coeffs:
            buf.write(",".join(f"{v:.12g}" for v in row) + "\n")
        return buf.getvalue()


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _is_pow2(n) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def pre_emphasize(signal, a: float) -> np.ndarray:
    """y[n] = x[n] - a*x[n-1], taking x[-1] = 0."""
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0:
        raise EmptySignal("cannot pre-emphasize an empty signal")
    out = x.copy()
    out[1:] -= a * x[:-1]
    return out


def frame_signal(signal, config: FrontendConfig, fs: int) -> FrameMatrix:
    x = np.asarray(signal, dtype=np.float64)
    L = config.frame_length(fs)
    H = config.hop_length(fs)
    if x.size < L:
        raise SignalTooShort(f"{x.size} samples is shorter than one {L}-sample frame")
    n_frames = 1 + (x.size - L) // H
    idx = np.arange(L)[None, :] + H * np.arange(n_frames)[:, None]
    return FrameMatrix(x[idx], fs)


def hamming_window(N: int) -> np.ndarray:
    if N < 2:
        raise InvalidLength(f"Hamming window needs N >= 2, got {N}")
    n = np.arange(N)
    return 0.54 - 0.46 * np.cos(2 * np.pi * n / (N - 1))


def apply_window(frames: FrameMatrix, window) -> FrameMatrix:
    w = np.asarray(window, dtype=np.float64)
    if w.shape != (frames.frame_length,):
        raise LengthMismatch(f"window length {w.size} != frame length {frames.frame_length}")
    return FrameMatrix(frames.frames * w, frames.sample_rate_hz)


def _check_fft_size(frame_len: int, n_fft: int) -> None:
    if not _is_pow2(n_fft):
        raise BadFftSize(f"n_fft must be a power of two, got {n_fft}")
    if n_fft < frame_len:
        raise BadFftSize(f"n_fft {n_fft} is smaller than the frame ({frame_len})")


def power_spectrum(frame, n_fft: int) -> np.ndarray:
    """One-sided |DFT|^2 of ``frame`` zero-padded to ``n_fft``; no 1/N scaling."""
    x = np.asarray(frame, dtype=np.float64)
    _check_fft_size(x.shape[-1], n_fft)
    X = np.fft.rfft(x, n=n_fft, axis=-1)
    return X.real ** 2 + X.imag ** 2


def mel_scale(f_hz):
    f = np.asarray(f_hz, dtype=np.float64)
    if np.any(f < 0):
        raise NegativeFrequency(f"negative frequency {f_hz}")
    m = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(m) if m.ndim == 0 else m


def inverse_mel(m):
    mel = np.asarray(m, dtype=np.float64)
    if np.any(mel < 0):
        raise NegativeMel(f"negative mel value {m}")
    f = 700.0 * (10.0 ** (mel / 2595.0) - 1.0)
    return float(f) if f.ndim == 0 else f


def build_mel_filterbank(config: FrontendConfig, fs: int) -> MelFilterBank:
    """Triangular filters with centers equally spaced in mel, unit peak at each center bin."""
    cfg = config.resolve(fs)
    n_fft, n_filt = cfg.n_fft, cfg.n_mel_filters
    mel_points = np.linspace(mel_scale(cfg.f_low_hz), mel_scale(cfg.f_high_hz), n_filt + 2)
    hz_points = inverse_mel(mel_points)
    bins = np.floor(n_fft * hz_points / fs + 0.5).astype(int)
    bins = np.minimum(bins, n_fft // 2)
    if np.any(np.diff(bins) <= 0):
        raise BandTooNarrow(
            f"{n_filt} filters over {cfg.f_low_hz:g}-{cfg.f_high_hz:g} Hz collapse onto shared FFT bins "
            f"at n_fft={n_fft}"
        )

    weights = np.zeros((n_filt, n_fft // 2 + 1))
    k = np.arange(n_fft // 2 + 1)
    for j in range(n_filt):
        left, center, right = bins[j], bins[j + 1], bins[j + 2]
        rise = (k - left) / (center - left)
        fall = (right - k) / (right - center)
        weights[j] = np.clip(np.minimum(rise, fall), 0.0, None)
    weights.setflags(write=False)
    return MelFilterBank(weights, hz_points[1:-1], bins)


def apply_filterbank(spectrum, bank: MelFilterBank) -> np.ndarray:
    s = np.asarray(spectrum, dtype=np.float64)
    if s.shape[-1] != bank.weights.shape[1]:
        raise LengthMismatch(f"spectrum length {s.shape[-1]} != filterbank width {bank.weights.shape[1]}")
    return s @ bank.weights.T


def log_compress(energies, floor: float) -> np.ndarray:
    if floor <= 0:
        raise ValueError("log floor must be positive")
    return np.log(np.maximum(np.asarray(energies, dtype=np.float64), floor))


def dct_basis(K: int, n_ceps: int) -> np.ndarray:
    """Rows n=1..n_ceps of cos(n (k - 1/2) pi / K), k=1..K."""
    n = np.arange(1, n_ceps + 1)[:, None]
    k = np.arange(1, K + 1)[None, :]
    return np.cos(n * (k - 0.5) * np.pi / K)


def dct_cepstrum(log_energies, n_ceps: int) -> np.ndarray:
    e = np.asarray(log_energies, dtype=np.float64)
    K = e.shape[-1]
    if n_ceps < 1:
        raise ValueError("n_ceps must be >= 1")
    if n_ceps > K:
        raise TooManyCoefficients(f"asked for {n_ceps} coefficients from {K} log energies")
    return e @ dct_basis(K, n_ceps).T


def compute_mfcc(clip: AudioClip, config: FrontendConfig | None = None) -> MfccMatrix:
    """Run the full front-end on ``clip``; row i holds the cepstrum of frame i."""
    config = config or FrontendConfig()
    fs = clip.sample_rate_hz
    cfg = config.resolve(fs)
    emphasized = pre_emphasize(clip.samples, cfg.pre_emphasis_a)
    frames = frame_signal(emphasized, cfg, fs)
    windowed = apply_window(frames, hamming_window(frames.frame_length))
    spectra = power_spectrum(windowed.frames, cfg.n_fft)
    energies = apply_filterbank(spectra, build_mel_filterbank(cfg, fs))
    coeffs = dct_cepstrum(log_compress(energies, cfg.log_floor), cfg.n_ceps)
    return MfccMatrix(coeffs, cfg)
