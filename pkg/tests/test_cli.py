import json

import pytest

from splinecpr.cli import SpecError, load_spec, main, read_csv


def _spec(tmp_path, doc, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return str(p)


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sample_then_recover(tmp_path, capsys):
    spec = _spec(tmp_path, {"generator": {"kind": "bspline", "order": 4}, "seed": 3})
    code, out, _ = _run(capsys, ["sample", "--spec", spec, "--out", str(tmp_path)])
    assert code == 0 and json.loads(out)["intervals"] > 0
    code, _, _ = _run(capsys, ["recover", str(tmp_path / "samples.csv"), "--spec", spec,
                               "--out", str(tmp_path / "rec")])
    assert code == 0
    rows = read_csv(tmp_path / "rec" / "recovered.csv")
    assert list(rows[0]) == ["k", "re", "im"]
    assert (tmp_path / "samples.csv").read_text().startswith("# splinecpr samples v1")
    truth = json.loads((tmp_path / "truth.json").read_text())
    report = json.loads((tmp_path / "rec" / "report.json").read_text())
    from splinecpr import CoeffSeq, dist_up_to_equiv
    t, r = CoeffSeq.from_dict(truth), CoeffSeq.from_dict(report["coefficients"])
    assert dist_up_to_equiv(t, r).dist <= 1e-8 * t.norm()


def test_recover_from_json_samples(tmp_path, capsys):
    spec = _spec(tmp_path, {"generator": {"kind": "phi1"}, "pathway": "gram",
                            "coefficients": {"offset": -1, "re": [1, 0.5, -1], "im": [0, 1, 0.25]}})
    assert main(["sample", "--spec", spec, "--out", str(tmp_path)]) == 0
    assert main(["recover", str(tmp_path / "samples.json"), "--spec", spec,
                 "--out", str(tmp_path)]) == 0
    capsys.readouterr()


def test_recover_failure_exit_code(tmp_path, capsys):
    spec = _spec(tmp_path, {"generator": {"kind": "bspline", "order": 4},
                            "coefficients": {"offset": 0, "re": [1, 0, 2, -1, 0.5],
                                             "im": [0, 1, 0, 0, 1]}})
    main(["sample", "--spec", spec, "--out", str(tmp_path)])
    doc = json.loads((tmp_path / "samples.json").read_text())
    doc["values_df"][2][0] += 7.0
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    code, _, err = _run(capsys, ["recover", str(tmp_path / "bad.json"), "--spec", spec,
                                 "--out", str(tmp_path)])
    assert code == 2 and "interval" in err


def test_unknown_key_reports_line(tmp_path, capsys):
    text = '{\n  "generator": {"kind": "bspline", "order": 3},\n  "seed": 1,\n\n  "colour": 4\n}\n'
    p = tmp_path / "bad.json"
    p.write_text(text)
    code, _, err = _run(capsys, ["analyze", "--spec", str(p)])
    assert code == 3 and f"{p}:5:" in err


def test_nested_violation_reports_line(tmp_path):
    text = '{\n  "generator": {\n    "kind": "bspline",\n    "order": -2\n  }\n}\n'
    p = tmp_path / "neg.json"
    p.write_text(text)
    with pytest.raises(SpecError, match=r"neg.json:4:"):
        load_spec(p)


def test_invalid_json_and_missing_spec(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "seed": 1,\n  oops\n}')
    code, _, err = _run(capsys, ["analyze", "--spec", str(p)])
    assert code == 3 and "broken.json:3:" in err
    assert _run(capsys, ["analyze", "--spec", str(tmp_path / "none.json")])[0] == 3
    assert _run(capsys, ["sample"])[0] == 3
    assert _run(capsys, ["figure1", "--noise", "-1", "--out", str(tmp_path)])[0] == 3


def test_bad_node_count_is_spec_error(tmp_path, capsys):
    spec = _spec(tmp_path, {"generator": {"kind": "bspline", "order": 3},
                            "nodes": {"gamma": [0.1, 0.2, 0.3], "gamma_prime": [0.5]}})
    code, _, err = _run(capsys, ["sample", "--spec", spec, "--out", str(tmp_path)])
    assert code == 3 and "nodes" in err


def test_analyze_b3(tmp_path, capsys):
    spec = _spec(tmp_path, {"generator": {"kind": "bspline", "order": 3}})
    code, out, _ = _run(capsys, ["analyze", "--spec", spec])
    rep = json.loads(out)
    assert code == 0
    assert (rep["dim_W"], rep["dim_W_with_deriv"], rep["spanning"]) == (5, 6, False)


def test_analyze_phi1_spans(tmp_path, capsys):
    spec = _spec(tmp_path, {"generators": [{"kind": "phi1"}, {"kind": "bspline", "order": 4}]})
    code, out, _ = _run(capsys, ["analyze", "--spec", spec])
    reps = json.loads(out)
    assert code == 0 and reps[0]["spanning"] and not reps[1]["spanning"]


def test_frame_check(tmp_path, capsys):
    spec = _spec(tmp_path, {"frame": {"trials": 50}})
    code, out, _ = _run(capsys, ["frame-check", "3", "--spec", spec])
    rep = json.loads(out)
    assert code == 0 and rep["sufficient_spanning"] and rep["monte_carlo_max_dist"] < 1e-8


def test_frame_check_needs_n(capsys):
    assert _run(capsys, ["frame-check"])[0] == 3


def test_experiment_deterministic(tmp_path, capsys):
    doc = {"generators": [{"kind": "bspline", "order": n} for n in (3, 4, 5)],
           "trials": 8, "seed": 11}
    spec = _spec(tmp_path, doc)
    for d in ("a", "b"):
        assert main(["experiment", "--spec", spec, "--out", str(tmp_path / d)]) == 0
    capsys.readouterr()
    for name in ("trials.csv", "aggregate.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    agg = read_csv(tmp_path / "a" / "aggregate.csv")
    assert [r["generator"] for r in agg] == ["B3", "B4", "B5"]
    assert all(float(r["success_rate"]) == 1.0 for r in agg)


def test_experiment_seed_flag_changes_trials(tmp_path, capsys):
    spec = _spec(tmp_path, {"generator": {"kind": "bspline", "order": 3}, "trials": 3})
    main(["experiment", "--spec", spec, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["experiment", "--spec", spec, "--out", str(tmp_path / "b"), "--seed", "2"])
    capsys.readouterr()
    assert (tmp_path / "a" / "trials.csv").read_text() != (tmp_path / "b" / "trials.csv").read_text()


def test_figure1_outputs(tmp_path, capsys):
    code, out, _ = _run(capsys, ["figure1", "--out", str(tmp_path), "--seed", "2"])
    assert code == 0
    re_rows = read_csv(tmp_path / "figure1_re.csv")
    im_rows = read_csv(tmp_path / "figure1_im.csv")
    assert len(re_rows) == len(im_rows) == 2048
    assert list(re_rows[0]) == ["x", "re_f", "re_f_eps"]
    rep = json.loads(out)
    assert max(rep["max_rel_re"], rep["max_rel_im"]) < 0.1
    first = (tmp_path / "figure1_re.csv").read_bytes()
    main(["figure1", "--out", str(tmp_path), "--seed", "2"])
    capsys.readouterr()
    assert (tmp_path / "figure1_re.csv").read_bytes() == first


def test_noisy_experiment_deterministic(tmp_path, capsys):
    spec = _spec(tmp_path, {"generators": [{"kind": "bspline", "order": 4}], "trials": 6,
                            "noise": 1e-6, "tolerance": 0.02, "seed": 5})
    for d in ("a", "b"):
        assert main(["experiment", "--spec", spec, "--out", str(tmp_path / d)]) == 0
    capsys.readouterr()
    assert (tmp_path / "a" / "trials.csv").read_bytes() == (tmp_path / "b" / "trials.csv").read_bytes()
    agg = read_csv(tmp_path / "a" / "aggregate.csv")
    assert float(agg[0]["success_rate"]) == 1.0 and float(agg[0]["noise"]) == 1e-6
