import numpy as np
import pytest

from collapselab import PreconditionError
from collapselab.config import ConfigError, load_config

GISIN = """\
[scenario]
kind = "gisin"
seed = 3

[model]
dimension = 2
profile = [1.0]
rate = 1.0

[times]
grid = [0.0, 1.0]

[gisin]
size = 100

[[gisin.decomposition_a]]
weight = 0.75
state_real = [1.0, 0.0]

[[gisin.decomposition_a]]
weight = 0.25
state_real = [0.0, 1.0]

[[gisin.decomposition_b]]
weight = 0.5
state_real = [0.8660254037844386, 0.5]

[[gisin.decomposition_b]]
weight = 0.5
state_real = [0.8660254037844386, -0.5]
"""

GRW = """\
[scenario]
kind = "grw"
seed = 5

[grid]
points = 64
spacing = 0.25
alpha = 1.0
omega = 1.0

[grw]
size = 100
packet_width = 2.0

[times]
grid = [0.5, 1.0]
"""


def load_text(tmp_path, text, **kw):
    path = tmp_path / "cfg.toml"
    path.write_text(text)
    return load_config(path, **kw)


class TestGisinConfig:
    def test_valid(self, tmp_path):
        cfg = load_text(tmp_path, GISIN)
        assert cfg.kind == "gisin"
        assert len(cfg.decomp_a) == 2 and len(cfg.decomp_b) == 2
        assert cfg.decomp_a.seed != cfg.decomp_b.seed

    def test_mismatched_densities_rejected_at_load(self, tmp_path):
        bad = GISIN.replace("weight = 0.75", "weight = 0.5").replace(
            "weight = 0.25", "weight = 0.5"
        )
        with pytest.raises(PreconditionError, match="different densities"):
            load_text(tmp_path, bad)

    def test_size_below_member_count_rejected(self, tmp_path):
        extra = """
[[gisin.decomposition_a]]
weight = 0.0
state_real = [1.0, 0.0]
"""
        with pytest.raises(PreconditionError, match="cover"):
            load_text(tmp_path, GISIN.replace("size = 100", "size = 2") + extra)

    def test_missing_decomposition_rejected(self, tmp_path):
        bad = GISIN.split("[[gisin.decomposition_b]]")[0]
        with pytest.raises(ConfigError, match="decomposition_b"):
            load_text(tmp_path, bad)


class TestGrwConfig:
    def test_valid_builds_packet(self, tmp_path):
        cfg = load_text(tmp_path, GRW)
        assert cfg.grid.points == 64
        assert cfg.initial.dim == 64
        assert abs(np.sum(np.abs(cfg.initial.amplitudes) ** 2) - 1.0) < 1e-12

    def test_grid_constraint_violation_is_precondition(self, tmp_path):
        with pytest.raises(PreconditionError, match="ring too small"):
            load_text(tmp_path, GRW.replace("points = 64", "points = 16"))

    def test_times_must_start_after_zero(self, tmp_path):
        with pytest.raises(ConfigError, match="after 0"):
            load_text(tmp_path, GRW.replace("grid = [0.5, 1.0]", "grid = [0.0, 1.0]"))

    def test_rate_tolerance_bounds(self, tmp_path):
        bad = GRW.replace("packet_width = 2.0", "packet_width = 2.0\nrate_tolerance = 1.5")
        with pytest.raises(PreconditionError, match="rate_tolerance"):
            load_text(tmp_path, bad)


class TestOverrides:
    def test_seed_and_workers_overrides(self, tmp_path):
        cfg = load_text(tmp_path, GRW, seed=99, workers=4)
        assert cfg.seed == 99 and cfg.workers == 4
        assert cfg.echo["scenario"]["seed"] == 99

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="kind"):
            load_text(tmp_path, GRW.replace('kind = "grw"', 'kind = "orbit"'))

    def test_wrong_type_named(self, tmp_path):
        with pytest.raises(ConfigError, match="grid.points"):
            load_text(tmp_path, GRW.replace("points = 64", 'points = "64"'))

    def test_imaginary_parts_accepted(self, tmp_path):
        text = """\
[scenario]
kind = "collapse"
seed = 1

[model]
dimension = 2
profile = [1.0]
rate = 1.0

[ensemble]
size = 10
initial_real = [0.6, 0.0]
initial_imag = [0.0, 0.8]

[times]
grid = [1.0]
"""
        cfg = load_text(tmp_path, text)
        assert abs(cfg.initial.amplitudes[1] - 0.8j) < 1e-12
