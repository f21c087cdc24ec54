import hashlib

import numpy as np
import pytest

from dyskit.cli import main
from dyskit.corpus import Dataset, DatasetItem, write_manifest
from dyskit.labels import ClassLabel


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert run("synth", out, "--per-class", 6, "--seed", 3) == 0
    return out


@pytest.fixture
def features(corpus_dir, tmp_path):
    path = tmp_path / "feats.csv"
    assert run("extract", corpus_dir / "manifest.csv", "-o", path) == 0
    return path


def digest(directory):
    h = hashlib.md5()
    for p in sorted(directory.iterdir()):
        h.update(p.name.encode() + p.read_bytes())
    return h.hexdigest()


def test_synth_is_byte_identical(tmp_path):
    assert run("synth", tmp_path / "a", "--per-class", 3, "--seed", 9) == 0
    assert run("synth", tmp_path / "b", "--per-class", 3, "--seed", 9) == 0
    assert digest(tmp_path / "a") == digest(tmp_path / "b")
    assert len(list((tmp_path / "a").glob("*.wav"))) == 6


def test_synth_rejects_tiny_corpus(tmp_path):
    assert run("synth", tmp_path / "c", "--per-class", 1) == 2


def test_extract_writes_feature_csv(features):
    lines = features.read_text().splitlines()
    assert lines[0].startswith("# dyskit-features aggregation=mean")
    assert lines[1].split(",")[:4] == ["label", "type", "source_id", "f1"]
    assert len(lines) == 2 + 12


def test_mean_std_gives_24_columns(corpus_dir, tmp_path):
    path = tmp_path / "wide.csv"
    assert run("extract", corpus_dir / "manifest.csv", "-o", path, "--agg", "mean-std") == 0
    assert path.read_text().splitlines()[1].split(",")[-1] == "f24"


def test_knn_train_and_self_classify(features, tmp_path, capsys):
    model = tmp_path / "knn.model"
    assert run("train", features, "-o", model, "--clf", "knn", "--k", 1) == 0
    capsys.readouterr()
    assert run("classify", model, "--features", features) == 0
    out = capsys.readouterr().out.splitlines()
    truth = {i.source_id: i.label.value for i in Dataset.from_csv(features.read_text())}
    assert len(out) == 12
    for line in out:
        source_id, label, score = line.split()
        assert label == truth[source_id] and float(score) == 1.0


def test_svm_train_and_classify_wav(corpus_dir, tmp_path, capsys):
    model = tmp_path / "svm.model"
    assert run("train", corpus_dir / "manifest.csv", "-o", model, "--clf", "svm") == 0
    capsys.readouterr()
    wav = corpus_dir / "fluent_000.wav"
    assert run("classify", model, "--wav", wav) == 0
    assert capsys.readouterr().out.split()[:2] == ["fluent_000.wav", "fluent"]
    assert run("classify", model, "--wav", wav, "--start", 0.1, "--end", 0.6) == 0
    assert capsys.readouterr().out.startswith("fluent_000.wav@0.1-0.6 ")


def test_svm_boundary_point_scores_zero(tmp_path, capsys):
    def ds(rows):
        return Dataset([DatasetItem(np.array([x]), ClassLabel(lab), None, sid) for sid, x, lab in rows])

    train = tmp_path / "toy.csv"
    train.write_text(ds([("a", 0.0, "fluent"), ("b", 2.0, "dysfluent")]).to_csv())
    query = tmp_path / "q.csv"
    query.write_text(ds([("mid", 1.0, "fluent"), ("far", 5.0, "dysfluent")]).to_csv())
    model = tmp_path / "toy.model"
    assert run("train", train, "-o", model, "--clf", "svm", "--C", 10) == 0
    capsys.readouterr()
    assert run("classify", model, "--features", query) == 0
    mid, far = capsys.readouterr().out.splitlines()
    assert abs(float(mid.split()[2])) < 1e-2
    assert far.split()[1] == "dysfluent" and float(far.split()[2]) == pytest.approx(4.0, abs=1e-2)


def test_evaluate_is_deterministic(corpus_dir, capsys, tmp_path):
    args = ["evaluate", corpus_dir / "manifest.csv", "--trials", 3, "--seed", 0]
    assert run(*args) == 0
    first = capsys.readouterr().out
    assert run(*args, "--csv", tmp_path / "r.csv", "--predictions", tmp_path / "p.csv") == 0
    assert capsys.readouterr().out == first
    assert "Average Classification (%)" in first
    assert (tmp_path / "p.csv").read_text().count("\n") == 1 + 2 * 3 * 2


def test_config_echo_goes_to_stderr(corpus_dir, capsys):
    run("evaluate", corpus_dir / "manifest.csv", "--clf", "knn", "--trials", 1)
    captured = capsys.readouterr()
    assert "resolved config" in captured.err and "resolved config" not in captured.out


# exit codes -----------------------------------------------------------------

def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 2


def test_bad_manifest_exits_2(tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("file,start_s,end_s,label,dysfluency_type\nx.wav,0,1,sometimes,\n")
    assert run("extract", m, "-o", tmp_path / "f.csv") == 2


def test_bad_model_exits_2(tmp_path, features):
    bad = tmp_path / "bad.model"
    bad.write_text("not a model\n")
    assert run("classify", bad, "--features", features) == 2


def test_class_too_small_exits_2(corpus_dir):
    assert run("evaluate", corpus_dir / "manifest.csv", "--train-fraction", 0.99) == 2


def test_missing_audio_exits_3(tmp_path):
    m = tmp_path / "m.csv"
    write_manifest(m, [("gone.wav", 0.0, 1.0, "fluent", None)])
    assert run("extract", m, "-o", tmp_path / "f.csv") == 3


def test_unwritable_output_exits_4(features, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("train", features, "-o", blocker / "sub" / "m.model") == 4


def test_single_class_exits_5(features, tmp_path):
    lines = features.read_text().splitlines()
    only = [ln for ln in lines[2:] if ln.startswith("fluent")]
    path = tmp_path / "one.csv"
    path.write_text("\n".join(lines[:2] + only) + "\n")
    assert run("train", path, "-o", tmp_path / "m.model") == 5


def test_unconverged_svm_exits_6(features, tmp_path):
    out = tmp_path / "m.model"
    assert run("train", features, "-o", out, "--clf", "svm", "--tol", 1e-300) == 6
    assert not out.exists()
    assert run("train", features, "-o", out, "--clf", "svm", "--tol", 1e-300, "--allow-unconverged") == 0
    assert "converged false" in out.read_text()


def test_dimension_mismatch_exits_7(corpus_dir, features, tmp_path, capsys):
    wide = tmp_path / "wide.csv"
    assert run("extract", corpus_dir / "manifest.csv", "-o", wide, "--agg", "mean-std") == 0
    model = tmp_path / "knn.model"
    assert run("train", features, "-o", model) == 0
    capsys.readouterr()
    assert run("classify", model, "--features", wide) == 7
    err = capsys.readouterr().err
    assert "24" in err and "12" in err


def test_incompatible_frontend_exits_7(features, tmp_path):
    assert run("train", features, "-o", tmp_path / "m.model", "--n-ceps", 13) == 7
