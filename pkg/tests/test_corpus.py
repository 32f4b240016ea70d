import math

import numpy as np
import pytest

from ricsense.corpus import (
    EXAMPLE_IDS,
    load_fixture,
    matches_printed,
    printed_unit,
    replicate,
    run_example,
    run_scaling,
)
from ricsense.errors import ValidationError
from ricsense.riccati import SystemLQ


@pytest.mark.parametrize(
    "s,unit", [("2.4", 0.1), ("130", 10.0), ("93000", 1000.0), ("-0.05", 0.01), ("0", 1.0), ("1", 1.0), ("0.0130", 1e-4)]
)
def test_printed_unit(s, unit):
    assert printed_unit(s) == pytest.approx(unit)


def test_matches_printed():
    assert matches_printed(2.41, "2.4")
    assert matches_printed(-1.118, "-1.11")
    assert not matches_printed(2.6, "2.4")
    assert matches_printed(0.0440, "4.4", 1e-2)


@pytest.mark.parametrize("eid", EXAMPLE_IDS)
def test_fixture_loads(eid):
    fx = load_fixture(eid)
    assert fx.id == eid
    assert np.array_equal(fx.system.R, np.eye(fx.system.m))
    assert fx.deltaA.shape == fx.system.A.shape
    # coupling-induced perturbations: zero diagonal blocks
    for s in fx.system.partition.slices():
        assert np.all(fx.deltaA[s, s] == 0)


def test_unknown_fixture():
    with pytest.raises(ValidationError):
        load_fixture(4)


def test_example1_values():
    rep = run_example(1)
    assert rep.sep == pytest.approx(4.0e-5, rel=0.10)
    assert rep.radius == pytest.approx(2.8e-3, rel=0.05)
    assert rep.check("closed_loop_eigenvalues").passed
    assert rep.check("perturbed_eigenvalues").passed
    assert rep.check("P_perturbed").passed
    assert rep.verdict["verdict"] == "unstable"


def test_example2_values():
    rep = run_example(2)
    assert 4.4e-11 / 2 <= rep.sep <= 4.4e-11 * 2
    assert rep.passed
    assert "P_perturbed" not in [c.name for c in rep.checks]


def test_example3_values():
    rep = run_example(3)
    assert rep.sep == pytest.approx(0.025, rel=0.05)
    assert rep.indicator_perturbed > 0.5 and rep.indicator_base < 0.02
    assert rep.check("P").passed
    # off-diagonal block of P + dP carries the printed 4.6e-2 entries
    assert rep.P_perturbed[0, 2] == pytest.approx(0.046, abs=0.001)


def test_run_example_idempotent():
    a, b = run_example(3).to_json(), run_example(3).to_json()
    assert a == b


def test_report_text_lists_every_check():
    rep = run_example(2)
    text = rep.to_text()
    for c in rep.checks:
        assert c.name in text


def test_replicate_structure():
    base = SystemLQ([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    sys = replicate(base, 3)
    assert sys.partition.sizes == (1, 1, 1)
    assert np.array_equal(sys.A, -np.eye(3))


def test_scaling_scalar():
    rep = run_scaling(SystemLQ([[-1.0]], [[1.0]], [[1.0]], [[1.0]]), (1, 2, 4, 9))
    assert rep.passed
    for row in rep.rows:
        assert row.frobenius_ratio == pytest.approx(math.sqrt(row.k), rel=1e-9)
        assert row.blockwise_ratio == pytest.approx(1.0, rel=1e-9)
    assert rep.rows[-1].frobenius_ratio == pytest.approx(3.0, rel=1e-9)


def test_scaling_matrix_base(rng):
    A0 = np.array([[0.0, 1.0], [-2.0, -0.3]])
    base = SystemLQ(A0, np.array([[0.0], [1.0]]), np.eye(2), [[1.0]])
    assert run_scaling(base, (1, 4, 9)).passed


def test_scaling_rejects_partitioned_base():
    base = replicate(SystemLQ([[-1.0]], [[1.0]], [[1.0]], [[1.0]]), 2)
    with pytest.raises(ValidationError):
        run_scaling(base)
