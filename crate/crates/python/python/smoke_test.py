"""Exercises the extension module end to end on the demo config."""

import json
import pathlib
import sys
import tempfile

import fuzzrank

FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "core" / "fixtures" / "configs"


def main() -> int:
    config = fuzzrank.Config.load(FIXTURES / "demo.json")
    params = (FIXTURES / "demo_params.json").read_text()
    archive = fuzzrank.simulate(config, params)
    assert len(archive) == len(config.fuzzers) * len(config.benchmarks) * config.trials
    assert archive.config_fingerprint == config.fingerprint()

    snaps, crashes = archive.to_csv()
    again = fuzzrank.Archive.from_csv(snaps, crashes, config)
    assert again.to_csv() == (snaps, crashes)

    analysis = fuzzrank.analyze(config, archive)
    doc = analysis.to_dict()
    assert doc["schema_version"] == 1
    cov = analysis.aggregates("coverage")
    assert set(cov) == set(config.fuzzers) and max(cov.values()) <= 100.0
    best = analysis.ranking("coverage", "average_rank")[0]
    print("best by average rank:", best)
    assert fuzzrank.Analysis.from_json(analysis.to_json()).to_json() == analysis.to_json()

    files = analysis.render_report(config, archive)
    assert "report.md" in files and any(p.startswith("plots/") for p in files)

    with tempfile.TemporaryDirectory() as tmp:
        exp = pathlib.Path(tmp) / "exp"
        archive.save(exp, config)
        cfg2, arc2 = fuzzrank.load_experiment(exp)
        assert arc2.to_csv() == (snaps, crashes)
        analysis.write_report(exp / "report", cfg2, arc2)
        assert (exp / "report" / "report.md").exists()

    assert fuzzrank.vargha_delaney_a12([1, 2, 3], [1, 2, 3]) == 0.5
    u, p, exact = fuzzrank.mann_whitney_u([1, 2, 3, 4, 5], [6, 7, 8, 9, 10])
    assert (u, exact) == (0.0, True) and abs(p - 0.00793650793650794) < 1e-12
    stat, p = fuzzrank.friedman_test([[1, 2, 3], [1, 2, 3], [1, 2, 3], [1, 2, 3]])
    assert stat == 8.0
    assert abs(fuzzrank.nemenyi_cd(3, 4) - 1.6572) < 1e-3
    assert fuzzrank.cosine_similarity([0, 0], [1, 1]) is None
    assert fuzzrank.median([3, 1, 2, 10]) == 2.5

    try:
        fuzzrank.Config.from_json(json.dumps({"name": "x"}))
    except ValueError as e:
        print("rejected bad config:", str(e).splitlines()[0])
    else:
        raise AssertionError("bad config accepted")

    print("smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
