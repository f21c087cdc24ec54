import numpy as np
import pytest

from dyskit.audio import AudioClip, write_wav
from dyskit.corpus import (
    Dataset,
    DatasetItem,
    Syllable,
    SynthParams,
    build_synthetic_dataset,
    load_manifest,
    parse_manifest,
    prolong_syllable,
    render,
    repeat_syllable,
    synth_dysfluent,
    synth_fluent,
    synthetic_items,
    write_manifest,
)
from dyskit.errors import (
    DimensionMismatch,
    EmptyDataset,
    IncompatibleFeatures,
    ManifestParseError,
    MissingAudio,
    SegmentError,
    UnsupportedType,
)
from dyskit.evaluation import KnnSpec, SvmSpec, run_trials
from dyskit.features import AggregationStrategy
from dyskit.labels import ClassLabel, DysfluencyType
from dyskit.mfcc import FrontendConfig

HEADER = "file,start_s,end_s,label,dysfluency_type\n"


@pytest.fixture
def wav_dir(tmp_path, rng):
    write_wav(tmp_path / "a.wav", AudioClip(rng.uniform(-0.5, 0.5, 32000), 16000))
    return tmp_path


def test_manifest_rows(wav_dir):
    m = wav_dir / "m.csv"
    m.write_text(HEADER + "a.wav,0,0.5,fluent,\na.wav,0.5,1.2,dysfluent,repetition\n")
    specs = parse_manifest(m)
    assert [s.label for s in specs] == [ClassLabel.FLUENT, ClassLabel.DYSFLUENT]
    assert specs[1].dysfluency_type is DysfluencyType.REPETITION
    assert specs[0].source_path == wav_dir / "a.wav"
    ds = load_manifest(m)
    assert len(ds) == 2 and ds.dimension == 12
    assert ds.items[1].source_id == "a.wav@0.5-1.2"


@pytest.mark.parametrize("body,row", [
    ("a.wav,0,0.5,maybe,\n", 1),
    ("a.wav,0,0.5,fluent,\na.wav,0.5,0.2,fluent,\n", 2),
    ("a.wav,0,0.5,fluent,repetition\n", 1),
    ("a.wav,0,0.5,dysfluent,stammer\n", 1),
    ("a.wav,0,0.5\n", 1),
    ("a.wav,zero,0.5,fluent,\n", 1),
])
def test_manifest_errors_name_the_row(wav_dir, body, row):
    m = wav_dir / "m.csv"
    m.write_text(HEADER + body)
    with pytest.raises(ManifestParseError) as exc:
        parse_manifest(m)
    assert exc.value.row == row and f"row {row}" in str(exc.value)


def test_manifest_header_and_empty(wav_dir):
    m = wav_dir / "m.csv"
    m.write_text("path,start,end,label,type\n")
    with pytest.raises(ManifestParseError):
        parse_manifest(m)
    m.write_text(HEADER)
    with pytest.raises(EmptyDataset):
        parse_manifest(m)


def test_manifest_audio_errors(wav_dir):
    m = wav_dir / "m.csv"
    m.write_text(HEADER + "missing.wav,0,0.5,fluent,\n")
    with pytest.raises(MissingAudio):
        load_manifest(m)
    m.write_text(HEADER + "a.wav,0,0.5,fluent,\na.wav,1.5,3.0,fluent,\n")
    with pytest.raises(SegmentError) as exc:
        load_manifest(m)
    assert exc.value.row == 2
    m.write_text(HEADER + "a.wav,0,0.01,fluent,\n")  # shorter than one frame
    with pytest.raises(SegmentError):
        load_manifest(m)


def test_write_manifest_round_trip(tmp_path):
    m = tmp_path / "m.csv"
    write_manifest(m, [("x.wav", 0.0, 1 / 3, ClassLabel.DYSFLUENT, DysfluencyType.PROLONGATION)])
    (spec,) = parse_manifest(m)
    assert spec.end_s == 1 / 3 and spec.dysfluency_type is DysfluencyType.PROLONGATION


def test_synthesis_is_deterministic():
    p = SynthParams(seed=11)
    assert synth_fluent(p) == synth_fluent(p)
    for t in (DysfluencyType.REPETITION, DysfluencyType.PROLONGATION, DysfluencyType.INTERJECTION):
        assert synth_dysfluent(p, t) == synth_dysfluent(p, t)
    assert synth_fluent(p) != synth_fluent(SynthParams(seed=12))


def test_pause_is_not_synthesized():
    with pytest.raises(UnsupportedType):
        synth_dysfluent(SynthParams(), DysfluencyType.PAUSE)


def test_clips_are_valid_audio():
    for seed in range(5):
        p = SynthParams(seed=seed)
        clips = [synth_fluent(p)] + [synth_dysfluent(p, t) for t in DysfluencyType if t is not DysfluencyType.PAUSE]
        for c in clips:
            assert c.duration_s >= 0.2
            assert np.max(np.abs(c.samples)) <= 1.0
            assert np.max(np.abs(c.samples)) > 0.05


def test_duration_grows_with_syllables():
    lengths = [len(synth_fluent(SynthParams(seed=4, syllable_count=n))) for n in range(1, 10)]
    assert lengths == sorted(lengths) and len(set(lengths)) == len(lengths)


def test_dysfluencies_lengthen_the_utterance():
    for seed in range(5):
        p = SynthParams(seed=seed)
        base = len(synth_fluent(p))
        for t in (DysfluencyType.REPETITION, DysfluencyType.PROLONGATION, DysfluencyType.INTERJECTION):
            assert len(synth_dysfluent(p, t)) > base


def test_repetition_and_prolongation_edits():
    syl = Syllable(period=100, amps=(1.0,), n_samples=1600, gain=0.5)
    plan = [syl, syl]
    repeated = repeat_syllable(plan, 1, [800, 900])
    assert len(repeated) == 4 and [s.gap_after for s in repeated[1:3]] == [800, 900]
    longer = prolong_syllable(plan, 0, 4.0)
    # 100 ms at 16 kHz stretched 4x gains 300 ms
    assert longer[0].n_samples - syl.n_samples == 4800
    assert len(render(longer, 16000)) - len(render(plan, 16000)) == 4800


def test_synthetic_items_layout():
    items = list(synthetic_items(SynthParams(), 6))
    assert [it[1] for it in items] == [ClassLabel.FLUENT] * 6 + [ClassLabel.DYSFLUENT] * 6
    assert [it[2].value for it in items[6:]] == ["repetition", "prolongation", "interjection"] * 2
    assert len({it[0] for it in items}) == 12
    with pytest.raises(ValueError):
        list(synthetic_items(SynthParams(), 1))


def test_dataset_balance_and_dimension():
    ds = build_synthetic_dataset(n_per_class=50)
    assert len(ds.class_indices(ClassLabel.FLUENT)) == 50
    assert len(ds.class_indices(ClassLabel.DYSFLUENT)) == 50
    assert ds.X.shape == (100, 12)
    wide = build_synthetic_dataset(n_per_class=3, strategy=AggregationStrategy.MEAN_STD)
    assert wide.dimension == 24


@pytest.mark.parametrize("seed", range(5))
def test_classes_are_separable(seed):
    ds = build_synthetic_dataset(SynthParams(seed=seed), n_per_class=50)
    for spec in (KnnSpec(), SvmSpec()):
        report = run_trials(ds, spec, n_trials=3, base_seed=seed)
        assert min(report.averages.values()) >= 90.0, (spec.id, report.averages)


def test_feature_csv_round_trip(tmp_path):
    ds = build_synthetic_dataset(n_per_class=3)
    back = Dataset.from_csv(ds.to_csv())
    assert np.array_equal(back.X, ds.X)
    assert back.labels == ds.labels
    assert [i.dysfluency_type for i in back] == [i.dysfluency_type for i in ds]
    assert back.frontend == ds.frontend and back.aggregation == ds.aggregation
    back.check_compatible(AggregationStrategy.MEAN, FrontendConfig())
    with pytest.raises(IncompatibleFeatures):
        back.check_compatible(AggregationStrategy.MEAN_STD, FrontendConfig())
    with pytest.raises(IncompatibleFeatures):
        back.check_compatible(AggregationStrategy.MEAN, FrontendConfig(n_ceps=13))


def test_dataset_rejects_mixed_shapes():
    items = [DatasetItem(np.zeros(3), ClassLabel.FLUENT, None, "a"),
             DatasetItem(np.zeros(4), ClassLabel.DYSFLUENT, None, "b")]
    with pytest.raises(DimensionMismatch):
        Dataset(items)
