"""Synthetic media sources and the counting sink.

Audio runs at 8 kHz in 20 ms frames (160 samples, 16-bit signed mono).
Video runs at 25 fps against a 90 kHz RTP clock (3600 ticks per frame).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

AUDIO_RATE = 8000
AUDIO_FRAME_SAMPLES = 160
AUDIO_FRAME_SECONDS = AUDIO_FRAME_SAMPLES / AUDIO_RATE  # 20 ms
TONE_AMPLITUDE = 8000

VIDEO_RATE = 90000
VIDEO_FPS = 25
VIDEO_TICKS_PER_FRAME = VIDEO_RATE // VIDEO_FPS
VIDEO_FRAME_BYTES = 256


@dataclass
class MediaFrame:
    kind: str  # "audio" or "video"
    seq: int
    timestamp: int
    rate: int
    data: bytes


class ToneSource:
    """Continuous-phase sine generator emitting 20 ms PCM frames."""

    def __init__(self, frequency: float = 440.0, amplitude: int = TONE_AMPLITUDE):
        if not 20.0 <= frequency <= 3400.0:
            raise ValueError(f"tone frequency {frequency} outside 20..3400 Hz")
        self.frequency = frequency
        self.amplitude = amplitude
        self._phase = 0.0  # radians, carried across frames
        self._seq = 0
        self._timestamp = 0

    @property
    def frame_interval(self) -> float:
        return AUDIO_FRAME_SECONDS

    def next_frame(self) -> MediaFrame:
        step = 2.0 * math.pi * self.frequency / AUDIO_RATE
        samples = bytearray()
        phase = self._phase
        for _ in range(AUDIO_FRAME_SAMPLES):
            samples += struct.pack("<h", int(round(self.amplitude * math.sin(phase))))
            phase += step
        self._phase = math.fmod(phase, 2.0 * math.pi)
        frame = MediaFrame("audio", self._seq, self._timestamp, AUDIO_RATE, bytes(samples))
        self._seq += 1
        self._timestamp += AUDIO_FRAME_SAMPLES
        return frame


class PatternSource:
    """Deterministic video frames: a header carrying the frame index, then
    a repeating byte ramp. Content only needs to be verifiable, not visible."""

    def __init__(self):
        self._seq = 0
        self._timestamp = 0

    @property
    def frame_interval(self) -> float:
        return 1.0 / VIDEO_FPS

    def next_frame(self) -> MediaFrame:
        header = struct.pack(">IIII", 0x50415454, self._seq, self._timestamp, VIDEO_FRAME_BYTES)
        body = bytes((self._seq + i) % 256 for i in range(VIDEO_FRAME_BYTES - len(header)))
        frame = MediaFrame("video", self._seq, self._timestamp, VIDEO_RATE, header + body)
        self._seq += 1
        self._timestamp += VIDEO_TICKS_PER_FRAME
        return frame


@dataclass
class StatsSink:
    """Counts what arrives; detects sequence gaps against the last seen seq."""

    frames: int = 0
    bytes: int = 0
    gaps: int = 0
    last_seq: int | None = None
    kinds: dict = field(default_factory=dict)

    def push(self, frame: MediaFrame) -> None:
        self.frames += 1
        self.bytes += len(frame.data)
        self.kinds[frame.kind] = self.kinds.get(frame.kind, 0) + 1
        if self.last_seq is not None and frame.seq != self.last_seq + 1:
            self.gaps += 1
        self.last_seq = frame.seq

    def snapshot(self) -> dict:
        return {
            "frames": self.frames,
            "bytes": self.bytes,
            "gaps": self.gaps,
            "last_seq": self.last_seq,
            "kinds": dict(self.kinds),
        }
