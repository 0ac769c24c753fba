import os
import subprocess
import sys

import numpy as np
import pytest

from msglass import _kernels
from msglass._kernels import pure
from msglass.functionals import _kernel_args

from conftest import random_model, random_pair


def test_backend_reported():
    assert _kernels.BACKEND in ("compiled", "pure")


def test_pure_matches_active_backend(rng):
    for _ in range(25):
        n = int(rng.integers(1, 4))
        model = random_model(rng, n, with_field=bool(rng.integers(0, 2)))
        pair = random_pair(rng, k=int(rng.integers(1, 7)), n=n, qbar=0.9)
        args = _kernel_args(pair, model)
        assert pure.b_value(*args) == pytest.approx(
            _kernels.b_value(*args), rel=1e-14, abs=1e-14
        )
        vp, gp = pure.b_value_grad(*args)
        va, ga = _kernels.b_value_grad(*args)
        assert vp == pytest.approx(va, rel=1e-14, abs=1e-14)
        assert np.allclose(gp, ga, rtol=1e-12, atol=1e-12)


def test_gap_condition_both_backends(rng):
    from msglass.orderparam import DiscretePair

    model = random_model(rng, 1)
    pair = DiscretePair.point_mass([1.0])
    args = _kernel_args(pair, model)
    assert pure.b_value(*args) == np.inf
    assert _kernels.b_value(*args) == np.inf


def test_env_var_forces_pure_backend():
    env = dict(os.environ, MSSG_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from msglass import _kernels; print(_kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "pure"
