"""Run configuration and dataset manifests.

One JSON document drives a whole run; the command line only overrides
individual leaves. Keys match field names exactly so a saved config loads
back equal to the original.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dsp import CqtConfig, StftConfig


@dataclass(frozen=True)
class SeparatorSettings:
    layers: int = 2
    hidden: int = 64
    epochs: int = 200
    batch_size: int = 10
    clip_seconds: float = 7.0

    def __post_init__(self):
        if min(self.layers, self.hidden, self.batch_size) <= 0 or self.epochs < 0:
            raise ValueError("separator sizes must be positive, epochs nonnegative")
        if self.clip_seconds <= 0:
            raise ValueError("clip_seconds must be positive")


@dataclass(frozen=True)
class AmtSettings:
    conv_channels: int = 16
    hidden: int = 64
    threshold: float = 0.5
    alpha: float = 0.35
    gamma: float = 3.0
    epochs: int = 100

    def __post_init__(self):
        if min(self.conv_channels, self.hidden) <= 0 or self.epochs < 0:
            raise ValueError("model sizes must be positive, epochs nonnegative")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold {self.threshold} outside (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha {self.alpha} outside (0, 1)")
        if self.gamma < 0.0:
            raise ValueError(f"gamma {self.gamma} must be nonnegative")


@dataclass(frozen=True)
class PathSettings:
    work_dir: str = "work"
    musescore: str | None = None


@dataclass(frozen=True)
class PipelineConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    cqt: CqtConfig = field(default_factory=CqtConfig)
    separator: SeparatorSettings = field(default_factory=SeparatorSettings)
    amt: AmtSettings = field(default_factory=AmtSettings)
    paths: PathSettings = field(default_factory=PathSettings)
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(
            stft=StftConfig(**d.get("stft", {})),
            cqt=CqtConfig(**d.get("cqt", {})),
            separator=SeparatorSettings(**d.get("separator", {})),
            amt=AmtSettings(**d.get("amt", {})),
            paths=PathSettings(**d.get("paths", {})),
            seed=d.get("seed", 0),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TrackEntry:
    mixture: Path
    stems: dict | None = None
    midi: Path | None = None


@dataclass(frozen=True)
class TrackManifest:
    tracks: tuple[TrackEntry, ...]

    def __len__(self) -> int:
        return len(self.tracks)

    def __iter__(self):
        return iter(self.tracks)


class ManifestError(ValueError):
    pass


def load_manifest(path) -> TrackManifest:
    """Read a JSON track list; every referenced file must already exist.

    Each entry: {"mixture": wav, "stems": {name: wav, ...}?, "midi": mid?}.
    Relative paths resolve against the manifest's own directory.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ManifestError(f"manifest {path} does not exist") from None
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest {path} is not valid JSON: {e}") from e
    if not isinstance(raw, list):
        raise ManifestError("manifest must be a JSON list of track entries")
    base = path.parent

    def checked(p: str) -> Path:
        full = base / p
        if not full.exists():
            raise ManifestError(f"manifest references missing file {full}")
        return full

    tracks = []
    for i, entry in enumerate(raw):
        if "mixture" not in entry:
            raise ManifestError(f"track {i} has no mixture path")
        stems = entry.get("stems")
        if stems is not None:
            stems = {name: checked(p) for name, p in stems.items()}
        midi = entry.get("midi")
        tracks.append(TrackEntry(
            mixture=checked(entry["mixture"]),
            stems=stems,
            midi=checked(midi) if midi is not None else None,
        ))
    return TrackManifest(tuple(tracks))
