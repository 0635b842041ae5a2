import os
import subprocess
import sys

import numpy as np
import pytest

from convstab import _kernels as K, zoo

from conftest import uniform_points

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not importable")


@needs_numba
@pytest.mark.parametrize("name", [n for n in zoo.NAMES if n != "diff_cx"])
def test_backends_agree(name, rng):
    f = zoo.get(name).expr
    X = uniform_points(f, 400, rng)
    S = rng.standard_normal(X.shape)
    tape = f.program.tape
    a = K.sweep(tape, X, S, radius=1e-9, backend="numpy")
    b = K.sweep(tape, X, S, radius=1e-9, backend="numba")
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v, rtol=1e-13, atol=1e-13)


@needs_numba
def test_integral_g1_stays_on_numpy():
    f = zoo.get("diff_cx").expr
    with pytest.raises(RuntimeError):
        K.sweep(f.program.tape, np.zeros((1, 1)), backend="numba")
    v = K.sweep(f.program.tape, np.array([[0.2]]))[0]
    assert np.isfinite(v[0])


def test_env_flag_disables_numba():
    env = dict(os.environ, CONVSTAB_DISABLE_NUMBA="1")
    code = ("from convstab import _kernels as K, zoo; import numpy as np;"
            "print(K.active_backend());"
            "print(repr(float(zoo.get('two_pits').expr.program.value([[0.3]])[0])))")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    assert out[0] == "numpy"
    assert float(out[1]) == zoo.get("two_pits").expr.program.value([[0.3]])[0]


def test_signs_override_branch():
    f = zoo.get("abs1d").expr
    v = K.sweep(f.program.tape, np.array([[0.5]]), signs=np.array([[-1.0]]), backend="numpy")[0]
    assert v[0] == -0.5
