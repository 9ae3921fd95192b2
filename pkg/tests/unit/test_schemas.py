"""
Tests for experiment configuration and report schemas.
"""

import json

import pytest

from rankflow.errors import ConfigError
from rankflow.model.assignment import AssignmentMode
from rankflow.schemas.experiment import (
    ExperimentConfig,
    StudySection,
    TagSpec,
    default_anchors,
    default_snapshot_times,
    load_experiment,
)
from rankflow.schemas.report import ConvergenceReport, FieldSummary, RunDistances, TagSummary
from rankflow.simulation.observables import Anchor
from tests.conftest import CONSTANT


class TestExperimentConfig:
    """Tests for experiment parsing."""

    def test_defaults(self, experiment_file):
        config = load_experiment(experiment_file())
        assert config.study.sizes == [500, 5000, 50000]
        assert config.study.seed_list == list(range(20))
        assert [tag.y for tag in config.tagged.tags] == [0.1, 0.5, 0.9]
        assert config.simulate.assignment == AssignmentMode.QUANTILE
        assert config.simulate.anchors is None
        assert config.load_model().A == 1

    def test_sections(self, experiment_file):
        path = experiment_file(
            simulate={
                "N": 50, "seed": 3, "snapshot_times": [0.5, 0.0, 0.5],
                "anchors": [{"y0": 0.0, "t0": 0.2}], "tags": [{"y": 0.3, "type": 0}],
            },
            study={"sizes": [400, 50, 400], "seeds": [4, 9], "assignment": "iid"},
        )
        config = load_experiment(path)
        assert config.simulate.snapshot_times == [0.0, 0.5]
        assert config.simulate.anchors[0].to_anchor() == Anchor(0.0, 0.2)
        assert config.simulate.tags[0].type_index == 0
        assert config.study.sizes == [50, 400]
        assert config.study.seed_list == [4, 9]
        assert config.study.assignment == AssignmentMode.IID

    def test_model_path_relative_to_config(self, test_data_dir):
        config = load_experiment(test_data_dir / "small_study.json")
        assert config.base_dir == test_data_dir
        assert config.load_model().A == 1

    def test_missing_model_file(self, experiment_file):
        config = load_experiment(experiment_file(model="nowhere.json"))
        with pytest.raises(ConfigError):
            config.load_model()

    @pytest.mark.parametrize("sections", [
        {"simulate": {"anchors": [{"y0": 0.3, "t0": 0.3}]}},
        {"simulate": {"N": 0}},
        {"simulate": {"unknown": 1}},
        {"study": {"sizes": []}},
        {"tagged": {"tags": [{"y": 1.0}]}},
        {"solve": {"grid_m": 2}},
    ])
    def test_rejects_bad_sections(self, experiment_file, sections):
        with pytest.raises(ConfigError):
            load_experiment(experiment_file(**sections))

    def test_unreadable_and_malformed(self, tmp_path):
        with pytest.raises(ConfigError):
            load_experiment(tmp_path / "absent.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError) as exc:
            load_experiment(bad)
        assert exc.value.exit_code == 2

    def test_base_dir_not_dumped(self):
        config = ExperimentConfig.model_validate({"model": CONSTANT})
        config.base_dir = None
        assert "base_dir" not in config.model_dump()

    def test_tag_alias(self):
        assert TagSpec.model_validate({"y": 0.2, "type": 1}).type_index == 1
        assert TagSpec(y=0.2, type_index=1).type_index == 1

    def test_seed_count(self):
        assert StudySection(seeds=3).seed_list == [0, 1, 2]


class TestDefaults:
    def test_snapshot_times(self):
        assert default_snapshot_times(2.0, 5) == [0.0, 0.5, 1.0, 1.5, 2.0]

    def test_anchors_cover_both_boundaries(self):
        anchors = default_anchors(1.0)
        assert any(a.t0 > 0 for a in anchors)
        assert any(a.y0 > 0 for a in anchors)
        assert all(a.y0 == 0.0 or a.t0 == 0.0 for a in anchors)


def sample_runs():
    return [
        RunDistances(N=N, seed=s, D_U=d, D_U_grid=d / 2, D_Yc=d / 3, D_tag=[d, 2 * d], D_V=d)
        for N, ds in ((100, (0.3, 0.1, 0.2)), (1000, (0.05, 0.04, 0.06)))
        for s, d in enumerate(ds)
    ]


class TestConvergenceReport:
    """Tests for report aggregation and serialization."""

    def make_report(self):
        runs = sample_runs()
        return ConvergenceReport(
            model_hash="abc",
            horizon=1.0,
            generator="philox4x64",
            sizes=[100, 1000],
            seeds=[0, 1, 2],
            snapshot_times=[0.0, 1.0],
            anchors=["y0=0,t0=0"],
            tags=[TagSummary(y=0.5, type_index=0, jumps_by_seed={0: 1, 1: 0})],
            field=FieldSummary(
                M=80, K=80, rate_bound=1.0, solidity_defect=1e-6,
                identity_defect=[1e-6], f_iterations=2, g_iterations=2,
            ),
            runs=runs,
            summary=ConvergenceReport.summarize(runs),
        )

    def test_summarize(self):
        summary = ConvergenceReport.summarize(sample_runs())
        assert [row.N for row in summary] == [100, 1000]
        assert summary[0].median_D_U == pytest.approx(0.2)
        assert summary[1].median_D_tag == pytest.approx([0.05, 0.1])
        assert summary[0].runs == 3

    def test_decreasing(self):
        report = self.make_report()
        assert report.medians("D_U") == pytest.approx([0.2, 0.05])
        assert report.decreasing("D_U")
        assert report.decreasing("D_V")

    def test_json_round_trip(self):
        report = self.make_report()
        restored = ConvergenceReport.model_validate(json.loads(report.model_dump_json()))
        assert restored == report

    def test_distance_bounds(self):
        with pytest.raises(ValueError):
            RunDistances(N=1, seed=0, D_U=2.5, D_U_grid=0.0, D_Yc=0.0)
