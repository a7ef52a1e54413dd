import numpy as np
import pytest

from aircomp.frames.frames import FrameSpec, build_etf
from aircomp.kron.kron import kron_decompose_symmetric
from aircomp.moments.moments import SystemConfig, build_moments


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def make_problem():
    """Factory returning (moments, kron) for a SystemConfig"""

    def _make(num_nodes, seq_len, p, sigma_x2=1.0, sigma_n2=0.0):
        config = SystemConfig(
            num_nodes=num_nodes,
            seq_len=seq_len,
            p=p,
            sigma_x2=sigma_x2,
            sigma_n2=sigma_n2,
        )
        moments = build_moments(config)
        return moments, kron_decompose_symmetric(moments.Mmat)

    return _make


@pytest.fixture(scope="session")
def etf_3x6():
    return build_etf(FrameSpec.builtin(3, 6))


@pytest.fixture(scope="session")
def etf_6x16():
    return build_etf(FrameSpec.builtin(6, 16))
