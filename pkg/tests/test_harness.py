import csv
import io
import json
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gapfield.acceptance import disk_sweep
from gapfield.errors import ConfigError, DomainError
from gapfield.harness.cli import main
from gapfield.harness.config import parse_config
from gapfield.harness.emit import emit, rows_to_csv, svg_loglog
from gapfield.harness.oracle import image_series_oracle
from gapfield.harness.sweep import SweepRow, fit_rate, run_sweep
from gapfield.solver import HarmonicBackground

SMALL = """\
[shape1]
kind = "circle"
radius = 1.0

[shape2]
kind = "ellipse"
a = 1.2
b = 0.8
angle = 0.3

[eps]
values = [0.05, 0.2, 0.1]

[background]
re1 = 1.0

[numerics]
spectrum = "none"
"""

DISKS = """\
[shape1]
kind = "circle"
[shape2]
kind = "circle"
[eps]
values = [0.1, 0.05]
[numerics]
probes = 8
"""


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


# config ---------------------------------------------------------------------
def test_parse_sorts_eps_descending():
    cfg = parse_config(SMALL)
    assert cfg.eps == (0.2, 0.1, 0.05)
    assert cfg.shape2.kind == "ellipse" and cfg.kind == "conducting"


def test_geometric_range():
    cfg = parse_config(SMALL.replace("values = [0.05, 0.2, 0.1]",
                                     "min = 1e-4\nmax = 1e-1\ncount = 7"))
    np.testing.assert_allclose(cfg.eps, np.geomspace(1e-1, 1e-4, 7), rtol=1e-15)


@pytest.mark.parametrize("bad", [
    SMALL + "\n[extra]\nx = 1\n",
    SMALL.replace("radius = 1.0", "radius = 1.0\ncolour = 2"),
    SMALL.replace("values = [0.05, 0.2, 0.1]", "values = [0.1, -0.1]"),
    SMALL.replace('spectrum = "none"', 'spectrum = "some"'),
    SMALL.replace("re1 = 1.0", "x = 1.0"),
    SMALL.replace('kind = "circle"', 'kind = "square"'),
    SMALL.replace("a = 1.2", "a = 1.2\na = 3"),
    "[shape1]\nkind = 'circle'\n",
])
def test_bad_configs_rejected(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_nonconvex_shape_is_config_error():
    text = SMALL.replace('kind = "circle"\nradius = 1.0',
                         'kind = "fourier"\nr0 = 1.0\nmodes = [[3, 0.3, 0.0]]')
    with pytest.raises(ConfigError):
        parse_config(text)


# rate fits ------------------------------------------------------------------
def test_fit_exact_power_law():
    rows = [{"x": x, "y": 3 * x**0.5} for x in (0.1, 0.01, 0.001, 1e-4)]
    slope, icpt, r2 = fit_rate(rows, "x", "y")
    assert slope == pytest.approx(0.5, abs=1e-12)
    assert icpt == pytest.approx(np.log(3), abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_noisy_inverse():
    rng = np.random.default_rng(7)
    x = np.geomspace(1e-4, 1e-1, 12)
    rows = [{"x": a, "y": (1 / a) * (1 + 0.01 * rng.normal())} for a in x]
    assert fit_rate(rows, "x", "y")[0] == pytest.approx(-1, abs=0.02)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_fit_recovers_any_power(p, c):
    rows = [{"x": x, "y": c * x**p} for x in np.geomspace(1e-3, 1, 5)]
    assert fit_rate(rows, "x", "y")[0] == pytest.approx(p, abs=1e-9)


def test_fit_errors():
    with pytest.raises(DomainError):
        fit_rate([{"x": 1, "y": 1}, {"x": 2, "y": 2}], "x", "y")
    with pytest.raises(DomainError):
        fit_rate([{"x": a, "y": 0.0} for a in (1, 2, 3)], "x", "y")
    with pytest.raises(DomainError):
        fit_rate([{"x": a, "y": 1.0} for a in (-1, 2, 3)], "x", "y")


# oracle ---------------------------------------------------------------------
def test_oracle_single_disk_limit():
    h = HarmonicBackground.linear(1.0, 0.0)
    r = 0.8
    diffs = []
    for x in (np.array([1.3, 0.4]), np.array([-0.2, -2.0]), np.array([0.0, 5.0])):
        u, g, _ = image_series_oracle((0.0, 0.0), r, (1e6, 0.0), 1.0, h.value,
                                      h.gradient, x)
        s = x @ x
        diffs.append(u - x[0] * (1 - r * r / s))
        exact = np.array([1 - r * r * (x[1] ** 2 - x[0] ** 2) / s**2,
                          2 * r * r * x[0] * x[1] / s**2])
        np.testing.assert_allclose(g, exact, atol=1e-10)
    # the far disk shifts u by a constant of order 1/distance
    assert np.ptp(diffs) < 1e-10


def test_oracle_self_convergence():
    h = HarmonicBackground.linear(1.0, 0.0)
    args = ((-1.005, 0.0), 1.0, (1.005, 0.0), 1.0, h.value, h.gradient, np.zeros(2))
    tol = 1e-10
    _, g1, _ = image_series_oracle(*args, tol=tol)
    _, g2, _ = image_series_oracle(*args, tol=tol / 2)
    assert np.max(np.abs(g1 - g2)) < tol * max(1.0, np.linalg.norm(g1))


def test_oracle_refuses_interior_point():
    h = HarmonicBackground.linear(1.0, 0.0)
    with pytest.raises(DomainError):
        image_series_oracle((0.0, 0.0), 1.0, (3.0, 0.0), 1.0, h.value, h.gradient,
                            np.array([0.5, 0.0]))


# sweeps ---------------------------------------------------------------------
def test_disk_sweep_rows():
    rows = disk_sweep()["conducting"]
    assert len(rows) == 7
    for r in rows:
        assert all(np.isfinite(v) for k, v in r.as_dict().items() if k != "neumann_residual")
        assert r.multiplicity == 2
        # u-gap = c_eps * q-gap
        assert r.u_gap == pytest.approx(r.c_eps * r.q_gap, rel=1e-8)
    last = min(rows, key=lambda r: r.eps)
    assert last.q_gap / (-np.sqrt(last.eps) / np.pi) == pytest.approx(1, abs=0.05)
    assert fit_rate(rows, "eps", "max_grad_u", skip_largest=True)[0] == \
        pytest.approx(-0.5, abs=0.05)


def test_sweep_deterministic():
    cfg = parse_config(SMALL)
    a, fa = run_sweep(cfg)
    b, fb = run_sweep(cfg)
    assert rows_to_csv(a) == rows_to_csv(b)
    assert not fa and not fb and [r.eps for r in a] == [0.2, 0.1, 0.05]


def test_sweep_records_failures_and_continues():
    cfg = parse_config(SMALL.replace("values = [0.05, 0.2, 0.1]", "values = [0.1, 0.05]"))
    rows, failures = run_sweep(cfg, n_override=16)
    # 16 nodes cannot resolve the gap: each row fails cleanly instead of aborting
    assert len(rows) + len(failures) == 2
    for f in failures:
        assert set(f) == {"eps", "error"}


def test_empty_sweep():
    cfg = parse_config(SMALL.replace("values = [0.05, 0.2, 0.1]", "values = []"))
    assert run_sweep(cfg) == ([], [])


# emission -------------------------------------------------------------------
def fake_rows(n):
    names = SweepRow.columns()
    return [SweepRow(**{k: (int(i + 2) if k in ("n", "multiplicity") else 10.0 ** -(i + 1))
                        for k in names}) for i in range(n)]


def test_csv_shape_and_header(tmp_path):
    rows = fake_rows(7)
    text = rows_to_csv(rows)
    lines = text.strip().split("\n")
    assert len(lines) == 8
    assert lines[0].split(",") == SweepRow.columns()
    back = list(csv.DictReader(io.StringIO(text)))
    assert float(back[3]["eps"]) == rows[3].eps


def test_json_round_trip_reproduces_config(tmp_path):
    cfg = parse_config(SMALL)
    paths = emit(fake_rows(3), "json", str(tmp_path), cfg)
    doc = json.loads(open(paths[0], encoding="utf-8").read())
    assert doc["config_source"] == SMALL
    assert len(doc["rows"]) == 3


def test_svg_one_polyline_per_series():
    svg = svg_loglog(fake_rows(4), [("eps", "max_grad_u"), ("eps", "q_gap"), ("eps", "hg")])
    assert svg.count("<polyline") == 3


def test_unwritable_output_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit(fake_rows(1), "csv", str(blocker / "sub"))


# command line ---------------------------------------------------------------
def test_cli_empty_sweep(tmp_path):
    cfg = write(tmp_path, SMALL.replace("values = [0.05, 0.2, 0.1]", "values = []"))
    out = tmp_path / "out"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "sweep.csv").read_text().count("\n") == 1


def test_cli_config_errors(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "missing.toml")]) == 2
    assert main(["solve", "--config", write(tmp_path, SMALL + "[bogus]\n")]) == 2
    cfg = write(tmp_path, SMALL)
    assert main(["solve", "--config", cfg, "--n-override", "15"]) == 2


def test_cli_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write(tmp_path, SMALL.replace("values = [0.05, 0.2, 0.1]", "values = [0.1]"))
    assert main(["qfun", "--config", cfg, "--out", str(blocker / "o")]) == 4


def test_cli_oracle_and_spectrum(tmp_path):
    cfg = write(tmp_path, DISKS)
    out = tmp_path / "o"
    assert main(["oracle", "--config", cfg, "--out", str(out), "--format", "both"]) == 0
    doc = json.loads((out / "oracle.json").read_text())
    assert all(r["passed"] for r in doc["records"])
    assert main(["spectrum", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "spectrum.csv")))
    assert [int(r["multiplicity_half"]) for r in rows] == [2, 2]


def test_cli_oracle_needs_circles(tmp_path):
    assert main(["oracle", "--config", write(tmp_path, SMALL)]) == 2


def test_cli_sweep_outputs(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "o"
    code = main(["sweep", "--config", cfg, "--out", str(out), "--format", "both",
                 "--plot", "eps:max_grad_u", "--plot", "eps:q_gap", "--seed", "3"])
    assert code == 0
    assert sorted(os.listdir(out)) == ["sweep.csv", "sweep.json", "sweep.svg"]
    doc = json.loads((out / "sweep.json").read_text())
    assert doc["config_source"] == SMALL
    assert doc["fits"]["max_grad_u_vs_eps"] is None   # two rows after skipping the largest
    assert (out / "sweep.svg").read_text().count("<polyline") == 2
