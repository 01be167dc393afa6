"""End-to-end subcommand tests on a small generated campaign."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from refqual.cli import main
from refqual.errors import EXIT_DATA, EXIT_OK, EXIT_USAGE
from refqual.synthdata import make_synthetic_corpus, write_synthetic_corpus

CONFIG_TEMPLATE = """\
[corpus]
articles = "articles.csv"
profiles = "profiles.csv"

[filter]
fraction = 0.10

[campaign]
repetitions = 3
output_dir = "out"
cache_dir = "cache"

[[models]]
model_id = "big"
unit_cost = 10.0

[[models]]
model_id = "small"
unit_cost = 1.0

[backend]
kind = "mock"
parallelism = 2
backoff_base = 0.0

[bootstrap]
level = 0.95
resamples = 60
seed = 13

[citations]
"2021" = "citations_2021.csv"
"2024" = "citations_2024.csv"

[analysis]
theoretical_max = "theoretical_max.csv"

[mock]
seed = 7
latent_quality = "latent_quality.csv"

[mock.behaviors.big]
noise = 0.5
bias = 0.3
{extra_big}

[mock.behaviors.small]
noise = 0.65
"""


@pytest.fixture(scope="module")
def campaign_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("campaign")
    write_synthetic_corpus(root, make_synthetic_corpus(seed=3, n_articles=160))
    (root / "campaign.toml").write_text(CONFIG_TEMPLATE.format(extra_big=""), encoding="utf-8")
    return root


def run(campaign_dir: Path, *argv: str) -> int:
    return main(["--config", str(campaign_dir / "campaign.toml"), *argv])


TABLES = [
    "articles_filtered.csv",
    "gold_scores.csv",
    "raw_reports.jsonl",
    "parsed_scores.csv",
    "model_means.csv",
    "combined_means.csv",
    "nlcs_values.csv",
    "correlations.csv",
    "ci_overlap.csv",
    "year_trend.csv",
    "mean_scores.csv",
    "cost_curve.csv",
]


class TestPipeline:
    def test_full_pipeline_produces_every_table(self, campaign_dir):
        for command in ("ingest", "score", "parse", "report"):
            assert run(campaign_dir, command) == EXIT_OK
        out = campaign_dir / "out"
        for name in TABLES:
            assert (out / name).exists(), name
        assert (out / "report_manifest.json").exists()

    def test_provenance_sidecars_written(self, campaign_dir):
        out = campaign_dir / "out"
        sidecar = out / "correlations.csv.manifest.json"
        assert sidecar.exists()
        doc = json.loads(sidecar.read_text())
        assert doc["config_sha256"]
        assert len(doc["prompt_checksums"]) == 4
        assert doc["seed"] == 13

    def test_rerun_is_noop_on_tables(self, campaign_dir):
        out = campaign_dir / "out"
        before = {name: (out / name).read_bytes() for name in TABLES}
        for command in ("ingest", "score", "parse", "report"):
            assert run(campaign_dir, command) == EXIT_OK
        after = {name: (out / name).read_bytes() for name in TABLES}
        assert before == after

    def test_second_score_run_hits_cache_only(self, campaign_dir):
        ledger_lines = (campaign_dir / "out" / "run_ledger.jsonl").read_text().splitlines()
        events = [json.loads(line) for line in ledger_lines]
        # the re-run in the previous test appended cache-hit entries only
        tail = events[len(events) // 2 :]
        assert all(e["cached"] for e in tail if e["event"] == "success")
        assert sum(e["cost"] for e in tail) == 0

    def test_correlations_table_has_all_indicators(self, campaign_dir):
        rows = (campaign_dir / "out" / "correlations.csv").read_text().splitlines()[1:]
        indicators = {line.split(",")[0] for line in rows}
        assert indicators == {"big", "small", "combined", "nlcs-2021", "nlcs-2024"}

    def test_scaled_rho_present_for_uoa_rows(self, campaign_dir):
        header, *rows = (campaign_dir / "out" / "correlations.csv").read_text().splitlines()
        columns = header.split(",")
        scaled_idx = columns.index("scaled_rho")
        uoa_idx = columns.index("uoa")
        for line in rows:
            parts = line.split(",")
            if parts[uoa_idx] != "ALL":
                assert parts[scaled_idx] != ""

    def test_prompt_preview(self, campaign_dir, capsys):
        assert run(campaign_dir, "prompt-preview", "--uoa", "30") == EXIT_OK
        captured = capsys.readouterr().out
        assert "world-leading" in captured
        assert "ARTS_HUMANITIES" in captured


class TestErrors:
    def test_missing_upstream_artifact_names_producer(self, tmp_path, capsys, caplog):
        write_synthetic_corpus(tmp_path, make_synthetic_corpus(seed=4, n_articles=80))
        (tmp_path / "campaign.toml").write_text(CONFIG_TEMPLATE.format(extra_big=""), encoding="utf-8")
        code = main(["--config", str(tmp_path / "campaign.toml"), "score"])
        assert code == EXIT_DATA
        assert any("refqual ingest" in r.message for r in caplog.records)

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["no-such-command"])
        assert excinfo.value.code == EXIT_USAGE

    def test_command_without_required_config(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["ingest"])
        assert excinfo.value.code == EXIT_USAGE

    def test_bad_config_is_data_error(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[corpus]\narticles = 'a.csv'\n", encoding="utf-8")
        assert main(["--config", str(path), "ingest"]) == EXIT_DATA


class TestResolveFlow:
    @pytest.fixture()
    def noisy_campaign(self, tmp_path) -> Path:
        write_synthetic_corpus(tmp_path, make_synthetic_corpus(seed=8, n_articles=80))
        config = CONFIG_TEMPLATE.format(extra_big="no_score_rate = 0.25")
        (tmp_path / "campaign.toml").write_text(config, encoding="utf-8")
        for command in ("ingest", "score", "parse"):
            assert main(["--config", str(tmp_path / "campaign.toml"), command]) == EXIT_OK
        return tmp_path

    def test_resolve_persists_and_never_reasks(self, noisy_campaign, monkeypatch):
        out = noisy_campaign / "out"
        queue = out / "unresolved_queue.jsonl"
        n_queued = len(queue.read_text().splitlines())
        assert n_queued > 0

        # first answer invalid and re-prompted, second flags a scoreless run
        answers = iter(["9", "2.5", "no score"] + ["3"] * (n_queued - 2))
        monkeypatch.setattr("builtins.input", lambda prompt="": next(answers))
        assert main(["--config", str(noisy_campaign / "campaign.toml"), "resolve"]) == EXIT_OK

        resolutions = (out / "manual_resolutions.jsonl").read_text().splitlines()
        assert len(resolutions) == n_queued
        assert not queue.read_text().splitlines()  # queue drained

        store = (out / "parsed_scores.csv").read_text().splitlines()
        assert any(",Manual" in line for line in store)
        exclusions = (out / "parse_exclusions.csv").read_text().splitlines()
        assert len(exclusions) == 2  # header plus the flagged run

        # a second resolve must not consume any input
        monkeypatch.setattr("builtins.input", lambda prompt="": pytest.fail("re-asked"))
        assert main(["--config", str(noisy_campaign / "campaign.toml"), "resolve"]) == EXIT_OK


class TestMakeSynth:
    def test_writes_dataset(self, tmp_path):
        assert main(["make-synth", "--dest", str(tmp_path / "d"), "--articles", "40"]) == EXIT_OK
        for name in ("articles.csv", "profiles.csv", "latent_quality.csv", "campaign.toml"):
            assert (tmp_path / "d" / name).exists()
