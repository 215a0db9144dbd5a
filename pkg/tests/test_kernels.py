import os
import subprocess
import sys

import numpy as np
import pytest

from caprox.kernels import BACKEND, _fallback

try:
    from caprox.kernels import _core
except ImportError:
    _core = None


def test_a_backend_is_active():
    assert BACKEND in ("cython", "python")


@pytest.mark.skipif(_core is None, reason="compiled extension not built")
class TestBackendEquivalence:
    def test_prox_bitwise_identical(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            m = np.ascontiguousarray(rng.standard_normal(211) * 3)
            tau = rng.uniform(1, 6)
            mu = rng.uniform(0.05, 5)
            np.testing.assert_array_equal(
                _core.prox_capped_elementwise(m, tau, mu),
                _fallback.prox_capped_elementwise(m, tau, mu),
            )

    def test_prox_tau_one_bitwise_identical(self):
        rng = np.random.default_rng(1)
        m = np.ascontiguousarray(rng.standard_normal(1000))
        np.testing.assert_array_equal(
            _core.prox_capped_elementwise(m, 1.0, 0.8),
            _fallback.prox_capped_elementwise(m, 1.0, 0.8),
        )

    def test_penalty_sum_matches(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = np.ascontiguousarray(rng.standard_normal(307))
            mu = rng.uniform(0.1, 3)
            a = _core.capped_penalty_sum(x, mu)
            b = _fallback.capped_penalty_sum(x, mu)
            assert abs(a - b) <= 1e-10 * max(1.0, abs(b))


def test_env_var_forces_fallback():
    code = "from caprox.kernels import BACKEND; print(BACKEND)"
    env = dict(os.environ, CAPROX_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
