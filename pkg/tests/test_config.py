import math

import pytest

from waveprobe.config import SCHEMA, ConfigError, normalize, parse_config

COOKBOOK = """
# reconstruction run
grid.n_space = 2
grid.nx = 64
grid.nt = 128
probe.epsilon = 0.5        # wide cap
probe.omega_count = 9
probe.eta = -2, -1, 0, 1, 2
potential.kind = bump
potential.radius = 0.4
potential.time = sin
run.lambda = 16
run.mu = 1e-2
run.refine = 4
"""


def test_minimal_config_defaults():
    cfg = parse_config("grid.nx = 16\n")
    assert cfg["probe.omega0"] == (1.0, 0.0)
    assert cfg["probe.epsilon"] == 0.1
    assert cfg["probe.lambdas"] == (4.0, 8.0, 16.0)
    assert cfg["grid.nx"] == 16


def test_negative_nt_reports_line():
    with pytest.raises(ConfigError, match="line 2") as e:
        parse_config("grid.nx = 16\ngrid.nt = -4\n")
    assert e.value.line == 2


@pytest.mark.parametrize("text,msg", [
    ("grid.bogus = 1", "unknown key"),
    ("grid.nx = sixteen", "integer"),
    ("probe.epsilon = 0.9", r"\(0, 0.5\]"),
    ("grid.nx = 16\ngrid.nx = 32", "already set"),
    ("just words", "section.key"),
    ("potential.kind = blob", "one of"),
    ("probe.omega0 = 1, 0, 0", "components"),
    ("probe.lambdas = 4, 0.5", "exceed 1"),
    ("potential.kind = file", "potential.path"),
])
def test_rejections(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_comments_and_blank_lines_ignored():
    cfg = parse_config("\n# only a comment\n   \ngrid.T = 2.0  # trailing\n")
    assert cfg["grid.T"] == 2.0


def test_normalize_is_idempotent():
    once = normalize(parse_config(COOKBOOK))
    assert normalize(parse_config(once)) == once
    assert parse_config(once).values == parse_config(COOKBOOK).values


def test_every_key_has_a_default_that_parses():
    text = normalize(parse_config(""))
    assert len([ln for ln in text.splitlines() if "=" in ln]) == len(SCHEMA)


def test_frequency_lists():
    cfg = parse_config("probe.xi = 0, 0, 1.5; 1, 2, 3\n")
    assert cfg["probe.xi"] == ((0.0, 0.0, 1.5), (1.0, 2.0, 3.0))
    assert parse_config("potential.xi = 3.141592653589793, 0, 0")["potential.xi"][0] == math.pi
