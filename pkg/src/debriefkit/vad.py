"""Energy-ratio voice activity detection over PCM16 mono audio.

A frame is voiced when its RMS energy exceeds ``energy_ratio`` times the
stream's own noise floor (10th percentile of frame RMS, floored at 1e-6), so
segment boundaries are invariant under uniform gain changes.
"""

from __future__ import annotations

import io
import wave
from dataclasses import dataclass

import numpy as np

from .errors import EmptyAudioError, FormatError
from .model import Role, VoiceSegment
from .ingest import normalize_voice_segments

ALLOWED_SAMPLE_RATES = (8000, 16000, 32000, 48000)

NOISE_FLOOR_EPS = 1e-6


@dataclass(frozen=True)
class AudioFrameStream:
    """Signed 16-bit mono samples for one entity."""

    entity: Role
    sample_rate_hz: int
    frames: np.ndarray

    def __post_init__(self) -> None:
        if self.sample_rate_hz not in ALLOWED_SAMPLE_RATES:
            raise FormatError(
                f"sample rate {self.sample_rate_hz} not in {ALLOWED_SAMPLE_RATES}"
            )


def read_wav(data: bytes | io.IOBase, entity: Role) -> AudioFrameStream:
    """Load a PCM16 mono WAV file."""
    buf = io.BytesIO(data) if isinstance(data, bytes) else data
    try:
        with wave.open(buf, "rb") as wav:
            if wav.getnchannels() != 1:
                raise FormatError("audio must be mono")
            if wav.getsampwidth() != 2:
                raise FormatError("audio must be 16-bit PCM")
            rate = wav.getframerate()
            raw = wav.readframes(wav.getnframes())
    except wave.Error as exc:
        raise FormatError(f"bad WAV file: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2")
    return AudioFrameStream(entity=entity, sample_rate_hz=rate, frames=samples)


def write_wav(stream: AudioFrameStream) -> bytes:
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(stream.sample_rate_hz)
        wav.writeframes(np.asarray(stream.frames, dtype="<i2").tobytes())
    return buf.getvalue()


def frame_rms(stream: AudioFrameStream, frame_ms: int) -> np.ndarray:
    """RMS energy per frame; the trailing partial frame is dropped."""
    per_frame = stream.sample_rate_hz * frame_ms // 1000
    n_frames = len(stream.frames) // per_frame
    if n_frames == 0:
        return np.zeros(0)
    clipped = np.asarray(stream.frames[: n_frames * per_frame], dtype=np.float64)
    frames = clipped.reshape(n_frames, per_frame)
    return np.sqrt(np.mean(frames * frames, axis=1))


def run_vad(
    audio: AudioFrameStream,
    frame_ms: int = 30,
    energy_ratio_threshold: float = 4.0,
    min_segment_ms: int = 200,
    merge_gap_ms: int = 300,
) -> list[VoiceSegment]:
    """Detect speech segments in an audio stream.

    Voiced frames merge into runs; runs separated by less than
    ``merge_gap_ms`` are joined, then runs shorter than ``min_segment_ms``
    are discarded. Output is disjoint and sorted.
    """
    if len(audio.frames) == 0:
        raise EmptyAudioError(f"no audio for {audio.entity.value}")
    rms = frame_rms(audio, frame_ms)
    if len(rms) == 0:
        return []
    noise_floor = max(float(np.percentile(rms, 10)), NOISE_FLOOR_EPS)
    voiced = rms > energy_ratio_threshold * noise_floor

    runs: list[list[int]] = []  # [from_ms, to_ms) per voiced run
    for i, v in enumerate(voiced):
        if not v:
            continue
        start = i * frame_ms
        if runs and runs[-1][1] == start:
            runs[-1][1] = start + frame_ms
        else:
            runs.append([start, start + frame_ms])

    joined: list[list[int]] = []
    for run in runs:
        if joined and run[0] - joined[-1][1] < merge_gap_ms:
            joined[-1][1] = run[1]
        else:
            joined.append(run)

    kept = [(a, b) for a, b in joined if b - a >= min_segment_ms]
    segments = [VoiceSegment(audio.entity, a, b) for a, b in kept]
    return normalize_voice_segments(segments)
