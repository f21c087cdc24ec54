"""Labelled datasets: manifest ingestion, feature dumps and a synthetic corpus.

The synthetic voices are stylized harmonic tones, not speech. They exist so
the whole pipeline can be exercised and evaluated without real recordings;
accuracy on them says nothing about accuracy on clinical audio.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from dyskit.audio import AudioClip, extract_segment, read_wav
from dyskit.errors import (
    AudioError,
    DimensionMismatch,
    EmptyDataset,
    FrontendError,
    IncompatibleFeatures,
    ManifestParseError,
    MissingAudio,
    SegmentError,
    UnsupportedType,
)
from dyskit.features import AggregationStrategy, aggregate
from dyskit.labels import SYNTHESIZABLE, ClassLabel, DysfluencyType
from dyskit.mfcc import FrontendConfig, compute_mfcc

MANIFEST_COLUMNS = ["file", "start_s", "end_s", "label", "dysfluency_type"]
FEATURES_TAG = "# dyskit-features"


@dataclass(frozen=True)
class SegmentSpec:
    source_path: Path
    start_s: float
    end_s: float
    label: ClassLabel
    dysfluency_type: DysfluencyType | None = None

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise ValueError(f"end_s ({self.end_s}) must exceed start_s ({self.start_s})")
        if self.start_s < 0:
            raise ValueError("start_s must be >= 0")
        if self.label is ClassLabel.FLUENT and self.dysfluency_type is not None:
            raise ValueError("a fluent segment cannot carry a dysfluency type")


@dataclass(frozen=True, eq=False)
class DatasetItem:
    features: np.ndarray
    label: ClassLabel
    dysfluency_type: DysfluencyType | None
    source_id: str


@dataclass(frozen=True, eq=False)
class Dataset:
    items: tuple[DatasetItem, ...]
    aggregation: AggregationStrategy = AggregationStrategy.MEAN
    frontend: FrontendConfig = field(default_factory=FrontendConfig)

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "aggregation", AggregationStrategy(self.aggregation))
        dims = {item.features.shape for item in self.items}
        if len(dims) > 1:
            raise DimensionMismatch(f"dataset mixes feature shapes {sorted(dims)}")
        for item in self.items:
            if not np.all(np.isfinite(item.features)):
                raise ValueError(f"non-finite features in {item.source_id}")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def dimension(self) -> int:
        if not self.items:
            raise EmptyDataset("empty dataset has no dimension")
        return self.items[0].features.shape[0]

    @property
    def X(self) -> np.ndarray:
        return np.array([item.features for item in self.items])

    @property
    def labels(self) -> list[ClassLabel]:
        return [item.label for item in self.items]

    def class_indices(self, label: ClassLabel) -> list[int]:
        return [i for i, item in enumerate(self.items) if item.label is label]

    def subset(self, indices) -> "Dataset":
        return replace(self, items=tuple(self.items[i] for i in indices))

    def check_compatible(self, aggregation, frontend: FrontendConfig) -> None:
        if AggregationStrategy(aggregation) is not self.aggregation or frontend != self.frontend:
            raise IncompatibleFeatures(
                f"features were extracted with aggregation={self.aggregation.value} "
                f"frontend={self.frontend.snapshot()}, expected aggregation={AggregationStrategy(aggregation).value} "
                f"frontend={frontend.snapshot()}"
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"{FEATURES_TAG} aggregation={self.aggregation.value} frontend={self.frontend.snapshot()}\n")
        writer = csv.writer(buf, lineterminator="\n")
        d = self.dimension if self.items else 0
        writer.writerow(["label", "type", "source_id"] + [f"f{i + 1}" for i in range(d)])
        for item in self.items:
            writer.writerow(
                [item.label.value, item.dysfluency_type.value if item.dysfluency_type else "", item.source_id]
                + [repr(float(v)) for v in item.features]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Dataset":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(FEATURES_TAG):
            raise ManifestParseError(f"feature file must start with '{FEATURES_TAG}'")
        meta = dict(part.split("=", 1) for part in lines[0][len(FEATURES_TAG):].split())
        try:
            aggregation = AggregationStrategy(meta["aggregation"])
            frontend = FrontendConfig.from_snapshot(meta["frontend"])
        except (KeyError, ValueError) as exc:
            raise ManifestParseError(f"bad feature file header: {exc}") from exc
        reader = csv.reader(lines[1:])
        header = next(reader, None)
        if header is None or header[:3] != ["label", "type", "source_id"]:
            raise ManifestParseError("feature file header must begin with label,type,source_id")
        items = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ManifestParseError(f"expected {len(header)} columns, got {len(row)}", row_no)
            try:
                label = ClassLabel.parse(row[0])
                dtype = DysfluencyType.parse(row[1])
                feats = np.array([float(v) for v in row[3:]])
            except ValueError as exc:
                raise ManifestParseError(str(exc), row_no) from exc
            items.append(DatasetItem(feats, label, dtype, row[2]))
        return cls(tuple(items), aggregation, frontend)


def read_features(path) -> Dataset:
    return Dataset.from_csv(Path(path).read_text())


def write_features(path, dataset: Dataset) -> None:
    Path(path).write_text(dataset.to_csv())


def featurize(clip: AudioClip, frontend: FrontendConfig, strategy: AggregationStrategy) -> np.ndarray:
    return aggregate(compute_mfcc(clip, frontend), strategy)


def parse_manifest(path) -> list[SegmentSpec]:
    path = Path(path)
    base = path.parent
    specs = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_COLUMNS:
            raise ManifestParseError(f"{path}: header must be {','.join(MANIFEST_COLUMNS)}")
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ManifestParseError(f"{path}: expected 5 columns, got {len(row)}", row_no)
            file_, start, end, label, dtype = (cell.strip() for cell in row)
            try:
                spec = SegmentSpec(
                    source_path=base / file_,
                    start_s=float(start),
                    end_s=float(end),
                    label=ClassLabel.parse(label),
                    dysfluency_type=DysfluencyType.parse(dtype),
                )
            except ValueError as exc:
                raise ManifestParseError(f"{path}: {exc}", row_no) from exc
            specs.append(spec)
    if not specs:
        raise EmptyDataset(f"manifest {path} has no rows")
    return specs


def load_manifest(path, frontend: FrontendConfig | None = None,
                  strategy: AggregationStrategy = AggregationStrategy.MEAN) -> Dataset:
    """Extract, featurize and label every manifest row, in file order."""
    frontend = frontend or FrontendConfig()
    strategy = AggregationStrategy(strategy)
    specs = parse_manifest(path)
    cache: dict[Path, AudioClip] = {}
    items = []
    for row_no, spec in enumerate(specs, start=1):
        if spec.source_path not in cache:
            if not spec.source_path.is_file():
                raise MissingAudio(f"row {row_no}: audio file not found: {spec.source_path}")
            try:
                cache[spec.source_path] = read_wav(spec.source_path)
            except AudioError as exc:
                raise type(exc)(f"row {row_no}: {spec.source_path}: {exc}") from exc
        try:
            segment = extract_segment(cache[spec.source_path], spec.start_s, spec.end_s)
            feats = featurize(segment, frontend, strategy)
        except (AudioError, FrontendError, ValueError) as exc:
            raise SegmentError(f"{spec.source_path.name} [{spec.start_s}, {spec.end_s}): {exc}", row_no) from exc
        source_id = f"{spec.source_path.name}@{spec.start_s:g}-{spec.end_s:g}"
        items.append(DatasetItem(feats, spec.label, spec.dysfluency_type, source_id))
    return Dataset(tuple(items), strategy, frontend)


def write_manifest(path, rows) -> None:
    """Write ``(file, start_s, end_s, label, dysfluency_type)`` rows with the standard header."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for file_, start, end, label, dtype in rows:
            writer.writerow([file_, repr(float(start)), repr(float(end)), str(label), str(dtype) if dtype else ""])


# ---------------------------------------------------------------------------
# synthesis

@dataclass(frozen=True)
class SynthParams:
    seed: int = 0
    sample_rate_hz: int = 16000
    syllable_count: int = 8
    base_pitch_hz: float = 140.0
    dysfluency_rate: float = 0.4

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.syllable_count < 1:
            raise ValueError("syllable_count must be >= 1")
        if not 0 < self.base_pitch_hz < self.sample_rate_hz / 8:
            raise ValueError("base_pitch_hz must be positive and well below Nyquist")
        if not 0 < self.dysfluency_rate <= 1:
            raise ValueError("dysfluency_rate must be in (0, 1]")


# envelope and timing constants, seconds
ATTACK_S = 0.015
RELEASE_S = 0.030
ONSET_S = 0.070
EDGE_SILENCE_S = 0.040
FLUENT_GAP_S = (0.005, 0.015)
REPEAT_GAP_S = (0.060, 0.120)
SYLLABLE_S = (0.120, 0.220)
SCHWA_AMPS = (1.0, 0.5, 0.25)
# harmonics that flare up briefly at each syllable onset
ONSET_HARMONICS = tuple(range(5, 11))


@dataclass(frozen=True)
class Syllable:
    """One voiced burst: a periodic harmonic tone under an amplitude envelope.

    ``period`` is the fundamental period in samples, so the steady part is
    exactly periodic and can be stretched by whole periods. ``onset_boost``
    scales a short burst of upper harmonics over the first ``ONSET_S``
    seconds, standing in for a consonant-to-vowel transition.
    """

    period: int
    amps: tuple[float, ...]
    n_samples: int
    gain: float
    onset_boost: float = 0.0
    gap_after: int = 0


def _period_for(pitch_hz: float, fs: int) -> int:
    return max(2, int(round(fs / pitch_hz)))


def render_syllable(syl: Syllable, fs: int) -> np.ndarray:
    n = np.arange(syl.n_samples)
    phase = 2 * np.pi * n / syl.period
    tone = np.zeros(syl.n_samples)
    for h, amp in enumerate(syl.amps, start=1):
        tone += amp * np.sin(h * phase)

    onset = min(int(ONSET_S * fs), syl.n_samples)
    if syl.onset_boost > 0 and onset:
        # held for the first half of the onset, then faded out
        ramp = np.clip(2 * (1 - n[:onset] / onset), 0.0, 1.0)
        burst = np.zeros(onset)
        for h in ONSET_HARMONICS:
            burst += np.sin(h * phase[:onset]) / (h - ONSET_HARMONICS[0] + 1)
        tone[:onset] += syl.onset_boost * ramp * burst
    tone /= sum(syl.amps) * (1 + syl.onset_boost)

    env = np.ones(syl.n_samples)
    a = min(int(ATTACK_S * fs), syl.n_samples // 2)
    r = min(int(RELEASE_S * fs), syl.n_samples // 2)
    if a:
        env[:a] = 0.5 - 0.5 * np.cos(np.pi * np.arange(a) / a)
    if r:
        env[-r:] = 0.5 + 0.5 * np.cos(np.pi * (np.arange(r) + 1) / r)
    return syl.gain * env * tone


def render(plan: list[Syllable], fs: int) -> AudioClip:
    edge = np.zeros(int(EDGE_SILENCE_S * fs))
    parts = [edge]
    for syl in plan:
        parts.append(render_syllable(syl, fs))
        parts.append(np.zeros(syl.gap_after))
    parts.append(edge)
    return AudioClip(np.clip(np.concatenate(parts), -1.0, 1.0), fs)


def fluent_plan(params: SynthParams) -> list[Syllable]:
    """Syllable plan for the fluent rendering; the first n syllables never depend on the count."""
    fs = params.sample_rate_hz
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, 0]))
    speaker_pitch = params.base_pitch_hz * rng.uniform(0.85, 1.15)
    speaker_gain = rng.uniform(0.35, 0.6)
    plan = []
    for _ in range(params.syllable_count):
        duration = rng.uniform(*SYLLABLE_S)
        gap = rng.uniform(*FLUENT_GAP_S)
        pitch = speaker_pitch * rng.uniform(0.93, 1.07)
        n_harm = int(rng.integers(3, 5))
        upper = rng.uniform([0.3, 0.1, 0.05], [0.9, 0.6, 0.4])
        amps = (1.0, *upper[:n_harm - 1])
        boost = rng.uniform(0.8, 1.2)
        plan.append(Syllable(
            period=_period_for(pitch, fs),
            amps=tuple(float(x) for x in amps),
            n_samples=int(round(duration * fs)),
            gain=float(speaker_gain * rng.uniform(0.85, 1.0)),
            onset_boost=float(boost),
            gap_after=int(round(gap * fs)),
        ))
    return plan


def repeat_syllable(plan, index: int, gaps_samples) -> list[Syllable]:
    """Insert one extra copy of syllable ``index`` per entry of ``gaps_samples``.

    Each copy is followed by its gap, then the original syllable follows.
    """
    syl = plan[index]
    copies = [replace(syl, gap_after=int(g)) for g in gaps_samples]
    return plan[:index] + copies + plan[index:]


def prolong_syllable(plan, index: int, stretch: float) -> list[Syllable]:
    """Lengthen the steady part so the syllable lasts about ``stretch`` times as long.

    The extension is a whole number of fundamental periods, which is the same
    as repeating one period of the steady waveform.
    """
    syl = plan[index]
    extra = int(round((stretch - 1) * syl.n_samples / syl.period)) * syl.period
    return plan[:index] + [replace(syl, n_samples=syl.n_samples + extra)] + plan[index + 1:]


def interject(plan, index: int, fs: int, base_pitch_hz: float, gap_samples: int) -> list[Syllable]:
    """Insert a quiet neutral 'um' before syllable ``index``."""
    mean_len = np.mean([s.n_samples for s in plan])
    ref = plan[index]
    schwa = Syllable(
        period=_period_for(0.8 * base_pitch_hz, fs),
        amps=SCHWA_AMPS,
        n_samples=int(round(1.5 * mean_len)),
        gain=0.3 * ref.gain,
        onset_boost=0.0,
        gap_after=gap_samples,
    )
    return plan[:index] + [schwa] + plan[index:]


def synth_fluent(params: SynthParams) -> AudioClip:
    return render(fluent_plan(params), params.sample_rate_hz)


def synth_dysfluent(params: SynthParams, dysfluency: DysfluencyType) -> AudioClip:
    """Fluent rendering of the same seed with dysfluency events spliced in.

    The number of events is ``round(dysfluency_rate * syllable_count)``, at
    least one, each on a different syllable.
    """
    dysfluency = DysfluencyType(dysfluency)
    if dysfluency not in SYNTHESIZABLE:
        raise UnsupportedType(f"cannot synthesize {dysfluency.value}")
    fs = params.sample_rate_hz
    plan = fluent_plan(params)
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, 1]))
    n_events = max(1, min(len(plan), int(math.floor(params.dysfluency_rate * len(plan) + 0.5))))
    # work from the back so earlier indices stay valid
    targets = sorted(rng.choice(len(plan), size=n_events, replace=False), reverse=True)
    for idx in targets:
        idx = int(idx)
        if dysfluency is DysfluencyType.REPETITION:
            extra = int(rng.integers(2, 4))
            gaps = np.round(rng.uniform(*REPEAT_GAP_S, size=extra) * fs)
            plan = repeat_syllable(plan, idx, gaps)
        elif dysfluency is DysfluencyType.PROLONGATION:
            plan = prolong_syllable(plan, idx, rng.uniform(3.0, 6.0))
        else:
            gap = int(round(rng.uniform(*FLUENT_GAP_S) * fs))
            plan = interject(plan, idx, fs, params.base_pitch_hz, gap)
    return render(plan, fs)


def item_seed(seed: int, index: int) -> int:
    """Stable per-item seed: numpy SeedSequence entropy mixing of (seed, index)."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def synthetic_items(params: SynthParams, n_per_class: int):
    """Yield ``(source_id, label, dysfluency_type, clip)`` for the synthetic corpus.

    Fluent items take indices 0..n-1 and dysfluent items n..2n-1; dysfluency
    types cycle repetition, prolongation, interjection.
    """
    if n_per_class < 2:
        raise ValueError("n_per_class must be at least 2 to allow a train/test split")
    for i in range(n_per_class):
        p = replace(params, seed=item_seed(params.seed, i))
        yield f"fluent_{i:03d}", ClassLabel.FLUENT, None, synth_fluent(p)
    for i in range(n_per_class):
        p = replace(params, seed=item_seed(params.seed, n_per_class + i))
        dtype = SYNTHESIZABLE[i % len(SYNTHESIZABLE)]
        yield f"dysfluent_{i:03d}_{dtype.value}", ClassLabel.DYSFLUENT, dtype, synth_dysfluent(p, dtype)


def build_synthetic_dataset(params: SynthParams | None = None, n_per_class: int = 50,
                            frontend: FrontendConfig | None = None,
                            strategy: AggregationStrategy = AggregationStrategy.MEAN) -> Dataset:
    params = params or SynthParams()
    frontend = frontend or FrontendConfig()
    strategy = AggregationStrategy(strategy)
    items = [
        DatasetItem(featurize(clip, frontend, strategy), label, dtype, source_id)
        for source_id, label, dtype, clip in synthetic_items(params, n_per_class)
    ]
    return Dataset(tuple(items), strategy, frontend)
