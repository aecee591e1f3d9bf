"""Compiled and pure-Python kernels must be draw-for-draw identical."""
import numpy as np
import pytest
from numpy.random import PCG64, SeedSequence

from idmc import _kernels_py
from idmc.models.infection import build_infection_model, default_infection_params
from idmc.tables import compile_program

compiled = pytest.importorskip("idmc._kernels")


def _bitgens(seed, m):
    return [PCG64(c) for c in SeedSequence(seed).spawn(m)]


def _flat():
    d = build_infection_model(default_infection_params())
    return compile_program(d, {3: 3.0}).flat


def test_compiled_flag():
    assert compiled.COMPILED is True
    assert _kernels_py.COMPILED is False


@pytest.mark.parametrize("h,random_scan,retain_all", [
    (0, False, False),
    (3, False, False),
    (3, True, False),
    (2, False, True),
])
def test_run_composite_bit_identical(h, random_scan, retain_all):
    flat = _flat()
    m = 60
    a = compiled.run_composite(
        flat, m, h, _bitgens(123, m), 100000, random_scan, retain_all
    )
    b = _kernels_py.run_composite(
        flat, m, h, _bitgens(123, m), 100000, random_scan, retain_all
    )
    assert a["status"] == b["status"] == 0
    np.testing.assert_array_equal(np.asarray(a["states"]), np.asarray(b["states"]))
    np.testing.assert_array_equal(np.asarray(a["attempts"]), np.asarray(b["attempts"]))
    np.testing.assert_array_equal(np.asarray(a["changes"]), np.asarray(b["changes"]))


def test_run_forward_attempts_bit_identical():
    flat = _flat()
    n = 5000
    a = compiled.run_forward_attempts(flat, n, PCG64(9))
    b = _kernels_py.run_forward_attempts(flat, n, PCG64(9))
    assert a == b > 0


def test_budget_status_matches():
    flat = _flat()
    m = 5
    a = compiled.run_composite(flat, m, 0, _bitgens(4, m), 1, False, False)
    b = _kernels_py.run_composite(flat, m, 0, _bitgens(4, m), 1, False, False)
    assert a["status"] == b["status"]
    assert a["done"] == b["done"]
