import json
import random

import numpy as np
import pytest
from sklearn.metrics import accuracy_score, confusion_matrix, f1_score, precision_recall_fscore_support

from csisense import (
    LABELS,
    ActivityLabel,
    BackendConfig,
    ChatGateway,
    ConstantPath,
    CsiSegment,
    ExperimentOptions,
    LlmMethod,
    LookupBackend,
    MockChatBackend,
    ParameterError,
    ScenarioParams,
    SegmentParseError,
    evaluate,
    generate_dataset,
    load_manifest,
    load_segment,
    make_scenario,
    run_experiment,
    save_segment,
    simulate,
)
from csisense.cli import main, parse_counts
from csisense.harness import predict_manifest, select_exemplars, train_count

B, W, F, N = LABELS


def gateway(backend, **kwargs):
    return ChatGateway(BackendConfig("https://llm.example/v1", "m", **kwargs), backend,
                       sleep=lambda s: None)


# ---------------------------------------------------------------------------
# Segment files


def test_round_trip(tmp_path):
    seg = simulate(make_scenario(W, 3))
    save_segment(seg, tmp_path / "s.csv")
    assert load_segment(tmp_path / "s.csv").equals(seg)


def test_round_trip_infers_rate_and_duration(tmp_path):
    seg = simulate(ScenarioParams(ConstantPath(3.0)), sample_rate=200, duration=2,
                   num_subcarriers=4)
    save_segment(seg, tmp_path / "s.csv")
    back = load_segment(tmp_path / "s.csv", num_subcarriers=4)
    assert back.sample_rate == 200 and back.duration == 2
    assert back.equals(seg)


def test_header_layout(tmp_path):
    save_segment(simulate(ScenarioParams(ConstantPath(3.0))), tmp_path / "s.csv")
    header = (tmp_path / "s.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 61
    assert header[:3] == ["t_sec", "sc00_re", "sc00_im"] and header[-1] == "sc29_im"


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


def small_file(tmp_path, edit=None):
    seg = simulate(ScenarioParams(ConstantPath(3.0)), sample_rate=10, duration=1)
    path = tmp_path / "s.csv"
    save_segment(seg, path)
    lines = path.read_text().splitlines()
    if edit:
        edit(lines)
    return write_lines(path, lines)


def test_59_columns(tmp_path):
    def drop_two(lines):
        lines[4] = ",".join(lines[4].split(",")[:59])

    with pytest.raises(SegmentParseError) as err:
        load_segment(small_file(tmp_path, drop_two))
    assert err.value.line == 5
    assert "59" in str(err.value) and "61" in str(err.value)
    assert "line 5" in str(err.value)


def test_out_of_order_timestamps(tmp_path):
    def swap(lines):
        lines[3], lines[4] = lines[4], lines[3]

    with pytest.raises(SegmentParseError) as err:
        load_segment(small_file(tmp_path, swap))
    assert err.value.line == 5


def test_non_numeric_cell(tmp_path):
    def garble(lines):
        cells = lines[2].split(",")
        cells[7] = "abc"
        lines[2] = ",".join(cells)

    with pytest.raises(SegmentParseError) as err:
        load_segment(small_file(tmp_path, garble))
    assert err.value.line == 3 and "abc" in str(err.value)


def test_bad_header(tmp_path):
    def rename(lines):
        lines[0] = lines[0].replace("t_sec", "time")

    with pytest.raises(SegmentParseError) as err:
        load_segment(small_file(tmp_path, rename))
    assert err.value.line == 1


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_segment(tmp_path / "nope.csv")


# ---------------------------------------------------------------------------
# Dataset generation


def test_train_count_rounds_half_up():
    assert [train_count(n) for n in (10, 123, 90, 1, 5)] == [7, 86, 63, 1, 4]


def test_table_one_counts(tmp_path):
    counts = {B: 86 + 37, W: 63 + 27, F: 63 + 27, N: 63 + 27}
    m = generate_dataset(0, counts, tmp_path, duration=0.1)
    got = m.counts()
    assert got["breath"] == {"train": 86, "test": 37}
    for name in ("walk", "fall", "no event"):
        assert got[name] == {"train": 63, "test": 27}
    assert len(m.split("test")) == 118


def test_only_walk(tmp_path):
    m = generate_dataset(1, {W: 10}, tmp_path)
    assert len(list(tmp_path.rglob("*.csv"))) == 10
    assert m.counts()["walk"] == {"train": 7, "test": 3}
    m.validate()


def test_same_seed_is_byte_identical(tmp_path):
    counts = {B: 2, W: 2, F: 2, N: 2}
    generate_dataset(5, counts, tmp_path / "a")
    generate_dataset(5, counts, tmp_path / "b")
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*"))
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*"))
    assert files_a == files_b
    for rel in files_a:
        if (tmp_path / "a" / rel).is_file():
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_manifest_round_trip(small_dataset):
    again = load_manifest(small_dataset.root_path)
    assert again.entries == small_dataset.entries
    assert again.to_json() == small_dataset.to_json()


def test_generation_errors(tmp_path):
    with pytest.raises(ParameterError):
        generate_dataset(0, {W: 0}, tmp_path)
    with pytest.raises(ParameterError):
        generate_dataset(0, {W: -1}, tmp_path)


# ---------------------------------------------------------------------------
# Metrics


def brute_metrics(pairs):
    """Straight-line recomputation: None predictions are wrong and excluded from
    the confusion matrix but still count toward their true class."""
    labels = list(LABELS)
    conf = [[0] * 4 for _ in labels]
    for t, p in pairs:
        if p is not None:
            conf[labels.index(t)][labels.index(p)] += 1
    correct = sum(1 for t, p in pairs if p is not None and t == p)
    per = {}
    f1s = []
    for i, lab in enumerate(labels):
        tp = conf[i][i]
        pred = sum(conf[r][i] for r in range(4))
        sup = sum(1 for t, _ in pairs if t == lab)
        prec = tp / pred if pred else 0.0
        rec = tp / sup if sup else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per[lab] = (prec, rec, f1, sup)
        if sup or pred:
            f1s.append(f1)
    return conf, correct / len(pairs), per, sum(f1s) / len(f1s), sum(p is None for _, p in pairs)


def random_pairs(rng, n):
    out = []
    for _ in range(n):
        t = rng.choice(LABELS)
        r = rng.random()
        out.append((t, None if r < 0.1 else t if r < 0.6 else rng.choice(LABELS)))
    return out


def assert_matches_oracle(pairs):
    report = evaluate(pairs)
    conf, acc, per, macro, unp = brute_metrics(pairs)
    assert [list(r) for r in report.confusion] == conf
    assert report.accuracy == acc
    assert report.macro_f1 == pytest.approx(macro, rel=0, abs=1e-15)
    assert report.num_unparseable == unp
    for lab in LABELS:
        m = report.per_class[lab]
        assert (m.precision, m.recall, m.f1, m.support) == pytest.approx(per[lab], abs=1e-15)


def test_metrics_against_brute_force():
    rng = random.Random(0)
    for _ in range(200):
        assert_matches_oracle(random_pairs(rng, rng.randint(1, 300)))


def test_metrics_against_sklearn():
    rng = random.Random(1)
    for _ in range(50):
        pairs = random_pairs(rng, rng.randint(1, 200))
        y_true = [t.value for t, _ in pairs]
        y_pred = [p.value if p is not None else "?" for _, p in pairs]
        names = [lab.value for lab in LABELS]
        report = evaluate(pairs)
        assert report.accuracy == pytest.approx(accuracy_score(y_true, y_pred))
        np.testing.assert_array_equal(report.confusion,
                                      confusion_matrix(y_true, y_pred, labels=names))
        p, r, f, _ = precision_recall_fscore_support(y_true, y_pred, labels=names,
                                                     zero_division=0)
        np.testing.assert_allclose([report.per_class[lab].precision for lab in LABELS], p)
        np.testing.assert_allclose([report.per_class[lab].recall for lab in LABELS], r)
        np.testing.assert_allclose([report.per_class[lab].f1 for lab in LABELS], f)
        present = [n for n in names if n in y_true or n in y_pred]
        assert report.macro_f1 == pytest.approx(
            f1_score(y_true, y_pred, labels=present, average="macro", zero_division=0))


def test_all_correct():
    pairs = [(lab, lab) for lab in LABELS for _ in range(10)]
    report = evaluate(pairs)
    assert report.accuracy == 1.0 and report.macro_f1 == 1.0


def test_every_fall_called_walk():
    truth = [B] * 37 + [W] * 27 + [F] * 27 + [N] * 27
    pairs = [(t, W if t is F else t) for t in truth]
    report = evaluate(pairs)
    assert report.accuracy == 91 / 118
    assert report.confusion[2] == (0, 27, 0, 0)
    assert report.per_class[F].recall == 0.0


def test_all_unparseable():
    pairs = [(lab, None) for lab in LABELS for _ in range(5)]
    report = evaluate(pairs)
    assert report.accuracy == 0.0
    assert report.num_unparseable == 20
    assert sum(map(sum, report.confusion)) == 0


def test_empty_evaluation():
    with pytest.raises(ParameterError):
        evaluate([])


def test_report_json():
    doc = json.loads(evaluate([(B, B), (W, None)]).to_json())
    assert doc["labels"] == ["breath", "walk", "fall", "no event"]
    assert doc["num_unparseable"] == 1 and doc["accuracy"] == 0.5


# ---------------------------------------------------------------------------
# Experiments


def test_rule_experiment(small_dataset):
    report = run_experiment(small_dataset, "rule")
    assert report.num_total == 12
    assert report.accuracy >= 0.95
    assert run_experiment(small_dataset, "rule") == report


def test_truth_echo_is_perfect(small_dataset):
    backend = LookupBackend.truth_oracle(small_dataset)
    report = run_experiment(small_dataset, LlmMethod("knowledge", gateway(backend)))
    assert report.accuracy == 1.0


def test_always_walk_scores_walk_fraction(small_dataset):
    report = run_experiment(small_dataset, LlmMethod("base", gateway(MockChatBackend("walk"))))
    tests = small_dataset.split("test")
    assert report.accuracy == sum(e.label is W for e in tests) / len(tests)


def test_unparseable_and_failed_answers_are_recorded(small_dataset):
    report = run_experiment(small_dataset, LlmMethod("cot", gateway(MockChatBackend("hmm"))))
    assert report.num_unparseable == 12 and report.accuracy == 0.0


def test_icl_prompts_carry_one_exemplar_per_class(small_dataset):
    backend = MockChatBackend("walk")
    run_experiment(small_dataset, LlmMethod("icl", gateway(backend)))
    text = backend.requests[0].user_text
    answers = [ln for ln in text.splitlines() if ln.startswith("Answer: ")]
    assert answers == [f"Answer: {lab.value}" for lab in LABELS]
    picked = select_exemplars(small_dataset, 0)
    assert all(e.split == "train" for e in picked)
    assert picked == select_exemplars(small_dataset, 0)


def test_multimodal_sends_images(small_dataset):
    backend = MockChatBackend("fall")
    run_experiment(small_dataset, LlmMethod("multimodal", gateway(backend)))
    assert all(r.messages[0].image_png[:4] == b"\x89PNG" for r in backend.requests)


def test_records_keep_manifest_order(small_dataset):
    records = predict_manifest(small_dataset, "rule")
    assert [r.path for r in records] == [e.path for e in small_dataset.split("test")]


def test_unknown_method(small_dataset):
    with pytest.raises(ParameterError):
        run_experiment(small_dataset, "svm")


def test_options_change_rendering(small_dataset):
    backend = MockChatBackend("walk")
    options = ExperimentOptions(num_points=20, decimals=1)
    run_experiment(small_dataset, LlmMethod("base", gateway(backend)), options)
    data = backend.requests[0].user_text.split("Input Data: ")[1].split("\n")[0]
    assert len(data.split(", ")) == 20


# ---------------------------------------------------------------------------
# CLI


def test_parse_counts():
    assert parse_counts("breath=3, no_event=2") == {B: 3, N: 2}
    assert parse_counts('{"walk": 4, "no event": 1}') == {W: 4, N: 1}
    with pytest.raises(ParameterError):
        parse_counts("walk")


def test_cli_generate_evaluate_classify_render(tmp_path, capsys):
    out = tmp_path / "ds"
    assert main(["generate", "--seed", "2", "--counts", "breath=3,walk=3,fall=3,no_event=3",
                 "--out", str(out)]) == 0
    assert (out / "manifest.json").is_file()

    report = tmp_path / "r.json"
    assert main(["evaluate", "--manifest", str(out / "manifest.json"),
                 "--report", str(report)]) == 0
    rule = json.loads(report.read_text())

    report2 = tmp_path / "r2.json"
    assert main(["evaluate", "--manifest", str(out), "--method", "llm", "--strategy",
                 "knowledge", "--backend", "mock-rule", "--report", str(report2)]) == 0
    assert json.loads(report2.read_text()) == rule

    seg = next((out / "fall").glob("*.csv"))
    capsys.readouterr()
    assert main(["classify", "--input", str(seg), "--plot", str(tmp_path / "p.png")]) == 0
    assert capsys.readouterr().out.strip().endswith("label: fall")
    assert (tmp_path / "p.png").read_bytes()[:4] == b"\x89PNG"

    assert main(["classify", "--input", str(seg), "--method", "llm", "--strategy", "cot",
                 "--backend", "mock:It looks like a fall."]) == 0
    assert "label: fall" in capsys.readouterr().out

    assert main(["render", "--input", str(seg), "--out", str(tmp_path / "q.png")]) == 0


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["classify", "--input", str(tmp_path / "missing.csv")]) == 2
    bad = write_lines(tmp_path / "bad.csv", ["t_sec,x", "0,1"])
    assert main(["classify", "--input", str(bad)]) == 2
    assert main(["generate", "--seed", "1", "--counts", "jump=3", "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--seed", "x", "--counts", "walk=1", "--out", str(tmp_path)])
    assert exc.value.code == 1


def test_cli_unparseable_answer_exits_1(tmp_path):
    seg = tmp_path / "s.csv"
    save_segment(simulate(make_scenario(B, 1)), seg)
    assert main(["classify", "--input", str(seg), "--method", "llm", "--strategy", "base",
                 "--backend", "mock:no clue"]) == 1


def test_cli_gateway_failure_exits_2(tmp_path):
    seg = tmp_path / "s.csv"
    save_segment(simulate(make_scenario(B, 1)), seg)
    # nothing listens on the discard port, so the single attempt fails
    assert main(["classify", "--input", str(seg), "--method", "llm", "--strategy", "base",
                 "--backend", "http", "--base-url", "http://127.0.0.1:9",
                 "--max-retries", "0", "--timeout", "2"]) == 2
