"""STFT analysis/synthesis, spectral features, and moment matching.

Array conventions:
    waveforms       (D, L)   real, D channels, L samples
    spectrograms    (T, F, D) complex, T frames, F bins, D channels
    feature tensors (T, Z)   real
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile


def sqrt_hann_window(length: int) -> np.ndarray:
    """Square-root Hann taper, sampled at bin midpoints.

    Midpoint sampling keeps the endpoints strictly positive, so the
    overlap-add inverse can recover every sample including the first one.
    The squared window is Hann-shaped and overlap-adds to a constant at
    4x overlap.
    """
    n = np.arange(length)
    return np.sin(np.pi * (n + 0.5) / length)


_WINDOWS = {
    "sqrt_hann": sqrt_hann_window,
    "rect": lambda length: np.ones(length),
}


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis parameters: 64 ms window, 16 ms shift at 16 kHz."""

    window_length: int = 1024
    shift: int = 256
    window: str = "sqrt_hann"
    fft_size: int | None = None

    def __post_init__(self):
        if self.fft_size is None:
            object.__setattr__(self, "fft_size", self.window_length)
        if self.window_length < 1 or self.shift < 1:
            raise ValueError("window_length and shift must be positive")
        if self.window_length % self.shift != 0:
            raise ValueError("shift must divide window_length")
        if self.fft_size != self.window_length:
            raise ValueError("fft_size must equal window_length")
        if self.window not in _WINDOWS:
            raise ValueError(f"unknown window {self.window!r}")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    def num_frames(self, num_samples: int) -> int:
        if num_samples < 1:
            raise ValueError("need at least one sample")
        effective = max(num_samples, self.window_length)
        return math.ceil((effective - self.window_length) / self.shift) + 1

    def frame_span(self, t: int) -> tuple[int, int]:
        """Sample range [start, end) covered by frame ``t``."""
        return t * self.shift, t * self.shift + self.window_length

    def frame_rate(self, sample_rate: int) -> float:
        return sample_rate / self.shift

    def taper(self) -> np.ndarray:
        return _WINDOWS[self.window](self.window_length)


@dataclass
class WaveformBlock:
    """Multichannel time signal, shape (D, L)."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[None, :]
        if samples.ndim != 2:
            raise ValueError("samples must have shape (D, L)")
        if samples.shape[0] < 1 or samples.shape[1] < 1:
            raise ValueError("need at least one channel and one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        self.samples = samples

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate


@dataclass
class SpectrogramTensor:
    """Complex STFT, shape (T, F, D)."""

    values: np.ndarray
    config: StftConfig

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 3:
            raise ValueError("values must have shape (T, F, D)")
        if values.shape[1] != self.config.num_bins:
            raise ValueError(
                f"bin count {values.shape[1]} inconsistent with fft_size "
                f"{self.config.fft_size}"
            )
        self.values = values.astype(np.complex128, copy=False)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_bins(self) -> int:
        return self.values.shape[1]

    @property
    def num_channels(self) -> int:
        return self.values.shape[2]


@dataclass
class FeatureTensor:
    """Stacked framewise features, shape (T, Z), with named blocks."""

    values: np.ndarray
    blocks: tuple[tuple[str, int], ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must have shape (T, Z)")
        if sum(size for _, size in self.blocks) != self.values.shape[1]:
            raise ValueError("block sizes do not add up to feature dimension")


@dataclass
class MomentStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape:
            raise ValueError("mean and std must have the same shape")
        if np.any(self.std <= 0):
            raise ValueError("std entries must be positive")


def stft(wave: WaveformBlock, cfg: StftConfig | None = None) -> SpectrogramTensor:
    """Per-channel short-time Fourier transform.

    The last frame is zero-padded; the frame count is
    ceil((L - window_length) / shift) + 1 for L >= window_length.
    """
    cfg = cfg or StftConfig()
    x = wave.samples
    num_frames = cfg.num_frames(x.shape[1])
    padded_len = (num_frames - 1) * cfg.shift + cfg.window_length
    if padded_len > x.shape[1]:
        x = np.pad(x, ((0, 0), (0, padded_len - x.shape[1])))
    frames = np.lib.stride_tricks.sliding_window_view(
        x, cfg.window_length, axis=1
    )[:, :: cfg.shift, :]
    spec = np.fft.rfft(frames * cfg.taper(), n=cfg.fft_size, axis=-1)
    return SpectrogramTensor(np.transpose(spec, (1, 2, 0)), cfg)


def _ola_window_product(cfg: StftConfig, num_frames: int) -> np.ndarray:
    taper = cfg.taper()
    out = np.zeros((num_frames - 1) * cfg.shift + cfg.window_length)
    product = taper * taper
    for t in range(num_frames):
        out[t * cfg.shift : t * cfg.shift + cfg.window_length] += product
    return out


def istft(spec: SpectrogramTensor, target_length: int) -> WaveformBlock:
    """Overlap-add inverse, normalized by the actual window product.

    For any waveform, ``istft(stft(w), L)`` reconstructs ``w`` with a
    relative L2 error far below 1e-6.
    """
    cfg = spec.config
    if spec.num_bins != cfg.num_bins:
        raise ValueError("spectrogram bins inconsistent with config fft_size")
    values = np.transpose(spec.values, (2, 0, 1))  # (D, T, F)
    frames = np.fft.irfft(values, n=cfg.fft_size, axis=-1)
    taper = cfg.taper()
    num_frames = spec.num_frames
    rec_len = (num_frames - 1) * cfg.shift + cfg.window_length
    out = np.zeros((values.shape[0], rec_len))
    weighted = frames * taper
    for t in range(num_frames):
        out[:, t * cfg.shift : t * cfg.shift + cfg.window_length] += weighted[:, t]
    denom = _ola_window_product(cfg, num_frames)
    np.divide(out, denom, out=out, where=denom > 1e-12)
    if target_length <= rec_len:
        out = out[:, :target_length]
    else:
        out = np.pad(out, ((0, 0), (0, target_length - rec_len)))
    return WaveformBlock(out)


def mel_filterbank(
    n_mels: int, fft_size: int, sample_rate: int, fmin: float = 0.0, fmax: float | None = None
) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, fft_size // 2 + 1)."""
    fmax = fmax if fmax is not None else sample_rate / 2

    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    edges = from_mel(np.linspace(to_mel(fmin), to_mel(fmax), n_mels + 2))
    bin_freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    fb = np.zeros((n_mels, bin_freqs.size))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bin_freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - bin_freqs) / max(hi - mid, 1e-12)
        fb[m] = np.clip(np.minimum(rising, falling), 0.0, 1.0)
    return fb


LOG_FLOOR = 1e-8


def log_features(
    spec: SpectrogramTensor,
    channel: int = 0,
    n_mels: int = 40,
    sample_rate: int = 16000,
) -> FeatureTensor:
    """Stack log-magnitude spectrogram and log-mel features of one channel.

    Magnitudes are floored at ``LOG_FLOOR`` before the log so digital
    silence stays finite.
    """
    if channel >= spec.num_channels:
        raise ValueError(f"channel {channel} out of range")
    mag = np.abs(spec.values[:, :, channel])
    log_spec = np.log(np.maximum(mag, LOG_FLOOR))
    fb = mel_filterbank(n_mels, spec.config.fft_size, sample_rate)
    log_mel = np.log(np.maximum(mag @ fb.T, LOG_FLOOR))
    values = np.concatenate([log_spec, log_mel], axis=1)
    return FeatureTensor(
        values, (("log_spectrogram", mag.shape[1]), ("log_mel", n_mels))
    )


def compute_stats(*features: FeatureTensor) -> MomentStats:
    """Per-dimension mean and standard deviation over one or more tensors."""
    if not features:
        raise ValueError("need at least one feature tensor")
    stacked = np.concatenate([f.values for f in features], axis=0)
    std = stacked.std(axis=0)
    if np.any(std <= 0):
        raise ValueError("zero variance in at least one feature dimension")
    return MomentStats(stacked.mean(axis=0), std)


def moment_match(
    features: FeatureTensor, src: MomentStats, tgt: MomentStats
) -> FeatureTensor:
    """Affine map taking features with statistics ``src`` to statistics ``tgt``."""
    values = (features.values - src.mean) / src.std * tgt.std + tgt.mean
    return FeatureTensor(values, features.blocks)


def read_wav(path) -> WaveformBlock:
    """Read a RIFF WAV file (PCM16 or float32) into a (D, L) block."""
    rate, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, None]
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype}")
    return WaveformBlock(samples.T, rate)


def write_wav(path, wave: WaveformBlock, dtype: str = "float32") -> None:
    """Write a (D, L) block as WAV; ``dtype`` is 'float32' or 'int16'."""
    data = wave.samples.T
    if dtype == "float32":
        wavfile.write(path, wave.sample_rate, data.astype(np.float32))
    elif dtype == "int16":
        clipped = np.clip(data, -1.0, 32767.0 / 32768.0)
        wavfile.write(path, wave.sample_rate, np.round(clipped * 32768.0).astype(np.int16))
    else:
        raise ValueError(f"unsupported dtype {dtype!r}")
