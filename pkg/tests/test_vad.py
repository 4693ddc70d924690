import math

import numpy as np
import pytest

from debriefkit.errors import EmptyAudioError, FormatError
from debriefkit.model import Role, VoiceSegment
from debriefkit.vad import AudioFrameStream, read_wav, run_vad, write_wav

RATE = 16_000


def pcm(*sections):
    """Concatenate (duration_ms, amplitude, freq_hz) tone/silence sections."""
    chunks = []
    for duration_ms, amplitude, freq in sections:
        n = RATE * duration_ms // 1000
        if amplitude == 0:
            chunks.append(np.zeros(n, dtype=np.int16))
        else:
            t = np.arange(n) / RATE
            wave = amplitude * np.sin(2 * math.pi * freq * t)
            chunks.append(wave.astype(np.int16))
    return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int16)


def stream(samples, entity=Role.PN1):
    return AudioFrameStream(entity=entity, sample_rate_hz=RATE, frames=samples)


def vad_oracle(samples, frame_ms=30, ratio=4.0, min_segment_ms=200, merge_gap_ms=300):
    """Brute-force frame walk evaluating the rules step by step."""
    per_frame = RATE * frame_ms // 1000
    rms = []
    for i in range(len(samples) // per_frame):
        frame = samples[i * per_frame : (i + 1) * per_frame].astype(np.float64)
        rms.append(math.sqrt(float(np.mean(frame * frame))))
    if not rms:
        return []
    floor = max(float(np.percentile(np.array(rms), 10)), 1e-6)
    voiced = [value > ratio * floor for value in rms]
    runs = []
    for i, v in enumerate(voiced):
        if v:
            start = i * frame_ms
            if runs and runs[-1][1] == start:
                runs[-1][1] = start + frame_ms
            else:
                runs.append([start, start + frame_ms])
    joined = []
    for run in runs:
        if joined and run[0] - joined[-1][1] < merge_gap_ms:
            joined[-1][1] = run[1]
        else:
            joined.append(run)
    return [(a, b) for a, b in joined if b - a >= min_segment_ms]


def as_tuples(segments):
    return [(s.from_ms, s.to_ms) for s in segments]


def test_all_zero_audio_has_no_segments():
    assert run_vad(stream(pcm((10_000, 0, 0)))) == []


def test_tone_in_silence_recovered_within_one_frame():
    samples = pcm((2000, 0, 0), (3000, 20_000, 440), (5000, 0, 0))
    segments = run_vad(stream(samples))
    assert as_tuples(segments) == vad_oracle(samples)
    assert len(segments) == 1
    seg = segments[0]
    assert abs(seg.from_ms - 2000) <= 30
    assert abs(seg.to_ms - 5000) <= 30


def test_close_tones_merge_into_one_segment():
    # [2000, 2100) and [2250, 2400) with a 150 ms gap < merge gap 300
    samples = pcm(
        (2000, 0, 0), (100, 20_000, 440), (150, 0, 0), (150, 20_000, 440), (7600, 0, 0)
    )
    segments = run_vad(stream(samples))
    expected = vad_oracle(samples)
    assert as_tuples(segments) == expected
    assert len(segments) == 1
    seg = segments[0]
    assert abs(seg.from_ms - 2000) <= 30
    assert abs(seg.to_ms - 2400) <= 30


def test_short_blip_dropped():
    samples = pcm((3000, 0, 0), (90, 20_000, 440), (6910, 0, 0))
    assert run_vad(stream(samples)) == []
    assert vad_oracle(samples) == []


def test_gap_at_least_merge_threshold_stays_split():
    samples = pcm(
        (1500, 0, 0), (300, 20_000, 440), (300, 0, 0), (300, 20_000, 440), (7600, 0, 0)
    )
    segments = run_vad(stream(samples))
    assert as_tuples(segments) == vad_oracle(samples)
    assert len(segments) == 2


@pytest.mark.parametrize("gain", [0.1, 0.5, 2.0, 10.0])
def test_gain_invariance(gain):
    samples = pcm((2000, 0, 0), (1500, 3000, 300), (1000, 0, 0), (800, 3000, 500), (4700, 0, 0))
    base = run_vad(stream(samples))
    scaled = np.clip(samples.astype(np.float64) * gain, -32768, 32767).astype(np.int16)
    rescored = run_vad(stream(scaled))
    assert len(base) == len(rescored)
    for a, b in zip(base, rescored):
        assert abs(a.from_ms - b.from_ms) <= 30
        assert abs(a.to_ms - b.to_ms) <= 30


def test_empty_audio_raises():
    with pytest.raises(EmptyAudioError):
        run_vad(stream(np.zeros(0, dtype=np.int16)))


def test_wav_roundtrip():
    samples = pcm((500, 12_000, 440))
    data = write_wav(stream(samples))
    back = read_wav(data, Role.SN1)
    assert back.sample_rate_hz == RATE
    assert back.entity == Role.SN1
    assert np.array_equal(back.frames, samples)


def test_rejects_unsupported_sample_rate():
    with pytest.raises(FormatError):
        AudioFrameStream(Role.PN1, 44_100, np.zeros(10, dtype=np.int16))


def test_output_segments_disjoint_and_sorted():
    samples = pcm(
        (700, 0, 0),
        (400, 18_000, 420),
        (500, 0, 0),
        (400, 18_000, 380),
        (250, 0, 0),
        (400, 18_000, 500),
        (7350, 0, 0),
    )
    segments = run_vad(stream(samples))
    assert as_tuples(segments) == vad_oracle(samples)
    for prev, cur in zip(segments, segments[1:]):
        assert prev.to_ms < cur.from_ms
    for seg in segments:
        assert isinstance(seg, VoiceSegment)
