"""WAV reading/writing and segment extraction.

Only uncompressed RIFF/WAVE is handled: format code 1 (16-bit PCM) and
format code 3 (32-bit IEEE float). Everything else is rejected rather than
guessed at.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dyskit.errors import EmptyAudio, EmptySegment, MalformedWav, OutOfRange, UnsupportedEncoding

WAVE_FORMAT_PCM = 1
WAVE_FORMAT_IEEE_FLOAT = 3

# slack for float noise when comparing segment times against clip duration
_TIME_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono floating-point audio in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        if int(self.sample_rate_hz) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip holds mono audio; samples must be 1-D")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if samples.size and np.max(np.abs(samples)) > 1.0:
            raise ValueError("samples must lie in [-1, 1]")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, AudioClip):
            return NotImplemented
        return self.sample_rate_hz == other.sample_rate_hz and np.array_equal(self.samples, other.samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def _iter_chunks(data: bytes, start: int):
    pos = start
    while pos + 8 <= len(data):
        chunk_id, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise MalformedWav(f"chunk {chunk_id!r} truncated ({len(body)} of {size} bytes)")
        yield chunk_id, body
        # chunks are word aligned
        pos += 8 + size + (size & 1)


def parse_wav_bytes(data: bytes) -> AudioClip:
    if len(data) < 12:
        raise MalformedWav("file too short for a RIFF header")
    riff, _, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF" or wave != b"WAVE":
        raise MalformedWav("missing RIFF/WAVE signature")

    fmt = None
    payload = None
    for chunk_id, body in _iter_chunks(data, 12):
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedWav("fmt chunk shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
            break
    if fmt is None:
        raise MalformedWav("no fmt chunk")
    if payload is None:
        raise MalformedWav("no data chunk")

    format_code, channels, rate, _, block_align, bits = fmt
    if channels < 1:
        raise MalformedWav("channel count is zero")
    if rate <= 0:
        raise MalformedWav("sample rate is zero")

    if format_code == WAVE_FORMAT_PCM and bits == 16:
        dtype = np.dtype("<i2")
    elif format_code == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedEncoding(f"format code {format_code} with {bits} bits per sample")
    if block_align != channels * dtype.itemsize:
        raise MalformedWav(f"block align {block_align} inconsistent with {channels} x {bits}-bit")

    n_frames = len(payload) // block_align
    if n_frames == 0:
        raise EmptyAudio("data chunk holds no sample frames")
    raw = np.frombuffer(payload[:n_frames * block_align], dtype=dtype).reshape(n_frames, channels)

    if format_code == WAVE_FORMAT_PCM:
        samples = raw.astype(np.float64) / 32768.0
    else:
        samples = raw.astype(np.float64)
        if not np.all(np.isfinite(samples)):
            raise MalformedWav("float data contains NaN or infinity")
    samples = samples.mean(axis=1) if channels > 1 else samples[:, 0]
    return AudioClip(np.clip(samples, -1.0, 1.0), rate)


def read_wav(path) -> AudioClip:
    """Load a WAV file as a mono clip; stereo is averaged across channels."""
    return parse_wav_bytes(Path(path).read_bytes())


def wav_bytes(samples, sample_rate_hz: int, encoding: str = "pcm16") -> bytes:
    """Serialize samples to WAV.

    ``samples`` is 1-D (mono) or 2-D ``[n_frames, n_channels]``.
    ``encoding`` is ``"pcm16"`` or ``"float32"``.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    channels = arr.shape[1]
    if encoding == "pcm16":
        ints = np.clip(np.round(arr * 32768.0), -32768, 32767).astype("<i2")
        payload, code, width = ints.tobytes(), WAVE_FORMAT_PCM, 2
    elif encoding == "float32":
        payload, code, width = arr.astype("<f4").tobytes(), WAVE_FORMAT_IEEE_FLOAT, 4
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    block_align = channels * width
    fmt = struct.pack("<HHIIHH", code, channels, sample_rate_hz, sample_rate_hz * block_align,
                      block_align, width * 8)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


def write_wav(path, clip: AudioClip, encoding: str = "pcm16") -> None:
    Path(path).write_bytes(wav_bytes(clip.samples, clip.sample_rate_hz, encoding))


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def extract_segment(clip: AudioClip, start_s: float, end_s: float) -> AudioClip:
    """Return samples ``[round(start_s*fs), round(end_s*fs))`` of ``clip``."""
    if start_s < 0 or end_s <= start_s:
        raise OutOfRange(f"need 0 <= start < end, got start={start_s}, end={end_s}")
    if end_s > clip.duration_s + _TIME_EPS:
        raise OutOfRange(f"end {end_s}s exceeds clip duration {clip.duration_s}s")
    fs = clip.sample_rate_hz
    lo = _round_half_up(start_s * fs)
    hi = min(_round_half_up(end_s * fs), len(clip))
    if hi <= lo:
        raise EmptySegment(f"segment [{start_s}, {end_s}) rounds to zero samples at {fs} Hz")
    return AudioClip(clip.samples[lo:hi], fs)
