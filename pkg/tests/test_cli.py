import json
import subprocess
import sys

import pytest

from simulcascade.cli import main
from simulcascade.fixtures import make_fixture


@pytest.fixture
def scenario_dir(tmp_path):
    make_fixture("greetings", tmp_path / "g")
    return tmp_path / "g"


def lines(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "simulcascade.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulcascade" in proc.stdout


def test_segment(scenario_dir, capsys):
    assert main(["segment", str(scenario_dir / "timeline.jsonl"), "--msd-ms", "1000"]) == 0
    segs = lines(capsys.readouterr().out)
    assert segs[0]["start_ms"] == 0 and segs[-1]["end_ms"] == 10_000
    assert all(s["end_ms"] - s["start_ms"] <= 1000 for s in segs)


def test_run_and_eval(scenario_dir, tmp_path, capsys):
    out = tmp_path / "log.jsonl"
    assert main(["run", str(scenario_dir), "--seed", "7", "-o", str(out)]) == 0
    assert main(["eval-latency", str(out), "--references", str(scenario_dir / "references.jsonl"), "--format", "jsonl"]) == 0
    summary = lines(capsys.readouterr().out)[-1]
    assert summary["unit"] == "word" and summary["stream_laal_ms"] > 0


def test_run_is_byte_identical(scenario_dir, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    main(["run", str(scenario_dir), "--seed", "7", "-o", str(a)])
    main(["run", str(scenario_dir), "--seed", "7", "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_transcribe_then_translate(tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    trace.write_text(
        "\n".join(
            json.dumps(r)
            for r in [
                {"interval_end_ms": 200, "words": ["hello", "there"]},
                {"interval_end_ms": 400, "words": ["hello", "there", "my"]},
                {"interval_end_ms": 500, "words": ["hello", "there", "my", "friend."], "final": True},
            ]
        )
    )
    assert main(["transcribe-sim", str(trace)]) == 0
    commits = capsys.readouterr().out
    words = [w["text"] for e in lines(commits) for w in e["payload"]["words"]]
    assert words == ["hello", "there", "my", "friend."]
    events = tmp_path / "commits.jsonl"
    events.write_text(commits)
    assert main(["translate-sim", str(events), "--mcs", "2"]) == 0
    out = lines(capsys.readouterr().out)
    assert [e["payload"]["text"] for e in out if e["kind"] == "TranslationEmitted"] == words
    assert out[-1]["kind"] == "SentenceCompleted"


def test_trace_out_of_order(tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    trace.write_text('{"interval_end_ms": 400, "words": []}\n{"interval_end_ms": 200, "words": []}\n')
    assert main(["transcribe-sim", str(trace)]) == 2
    assert "error:" in capsys.readouterr().err


def test_eval_bleu(tmp_path, capsys):
    hyp, ref = tmp_path / "h.txt", tmp_path / "r.txt"
    hyp.write_text("the cat sat on the mat\nthe dog runs in the park\n")
    ref.write_text("the cat is on the mat\nthe dog runs in a park\n")
    assert main(["eval-bleu", "--hyp", str(hyp), "--ref", str(ref), "--format", "jsonl"]) == 0
    assert lines(capsys.readouterr().out)[0]["bleu"] == pytest.approx(42.044820762685724)
    ref.write_text("one line\n")
    assert main(["eval-bleu", "--hyp", str(hyp), "--ref", str(ref)]) == 2
    assert "error:" in capsys.readouterr().err


def test_sweep(scenario_dir, tmp_path, capsys):
    out = tmp_path / "rows.jsonl"
    assert main(["sweep", str(scenario_dir), "--mcs", "1,3", "--seed", "7", "-o", str(out)]) == 0
    assert "StreamLAAL" in capsys.readouterr().out
    assert [r["mcs"] for r in lines(out.read_text())] == [1, 3]


def test_sweep_with_failing_point(scenario_dir, capsys):
    assert main(["sweep", str(scenario_dir), "--vpt", "0.5,7"]) == 1
    assert "failed" in capsys.readouterr().err


def test_clean(data_dir, tmp_path, capsys):
    out = tmp_path / "kept.jsonl"
    assert main(["clean", str(data_dir / "cleaner_corpus.jsonl"), "--qe-threshold", "0.0", "-o", str(out)]) == 0
    stats = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert stats["input"] == 20 and stats["dropped"]["length"] == 4
    assert stats["kept"] == len(out.read_text().splitlines())


def test_build_prompts(tmp_path, capsys):
    (tmp_path / "s").write_text("hello world\n")
    (tmp_path / "t").write_text("hallo welt\n")
    (tmp_path / "a").write_text("0-0 1-1\n")
    args = ["build-prompts", "--source", str(tmp_path / "s"), "--target", str(tmp_path / "t"), "--align", str(tmp_path / "a")]
    assert main(args + ["--merge-prob", "0", "--shift-prob", "0"]) == 0
    (rec,) = lines(capsys.readouterr().out)
    assert rec["tokens"] == "<s> <t> hello </t> hallo </s> <s> <t> world </t> welt </s>".split()
    assert rec["loss_ranges"] == [[4, 5], [10, 11]]
    (tmp_path / "a").write_text("0-5\n")
    assert main(args) == 2


def test_make_fixture(tmp_path, capsys):
    assert main(["make-fixture", "lecture", "-o", str(tmp_path / "lec")]) == 0
    assert (tmp_path / "lec" / "timeline.jsonl").exists()
    assert main(["make-fixture", "nope", "-o", str(tmp_path / "x")]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_config_file(scenario_dir, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"segmenter": {"voice_prob_threshold": 1.5}}))
    assert main(["run", str(scenario_dir), "--config", str(cfg)]) == 2
    assert "segmenter.voice_prob_threshold" in capsys.readouterr().err
