from pathlib import Path

import pytest

from aircomp.optimize.optimizer import OptimizerParams
from aircomp.simulate.simulator import McConfig
from aircomp.utils.config import (
    FILE,
    RANDOM,
    ExperimentSpec,
    GridPoint,
    apply_overrides,
    default_p_grid,
    load_experiment_spec,
    spec_from_dict,
)

CONFIG_DIR = Path(__file__).parents[1] / "runscripts" / "configs"


def test_default_p_grid():
    grid = default_p_grid()

    assert len(grid) == 20
    assert grid[0] == 1e-3
    assert grid[1] == pytest.approx(0.25)
    assert grid[-1] == pytest.approx(4.0)
    assert all(a < b for a, b in zip(grid, grid[1:]))


def test_default_spec_grid():
    spec = ExperimentSpec()

    points = spec.grid_points()

    assert spec.shapes == ((3, 6), (6, 16))
    assert spec.sigma_n2 == (1e-3, 0.1)
    assert len(points) == 2 * 1 * 2 * 20
    assert points[0] == GridPoint(seq_len=3, K=6, p=1e-3, sigma_x2=1.0, sigma_n2=1e-3)


def test_grid_point_tag():
    point = GridPoint(seq_len=3, K=6, p=0.25, sigma_x2=1.0, sigma_n2=1e-3)
    assert point.tag == "K6_M3_sx2_1_sn2_0.001_p0.25"


def test_default_yaml_matches_defaults():
    spec = load_experiment_spec(CONFIG_DIR / "default_sweep.yaml")

    defaults = ExperimentSpec()
    assert spec.shapes == defaults.shapes
    assert spec.sigma_x2 == defaults.sigma_x2
    assert spec.sigma_n2 == defaults.sigma_n2
    assert spec.p_grid == defaults.p_grid
    assert spec.optimizer == defaults.optimizer
    assert spec.monte_carlo == defaults.monte_carlo
    assert spec.init_policy == defaults.init_policy


def test_restart_yaml():
    spec = load_experiment_spec(CONFIG_DIR / "noise_0p01.yaml")

    assert spec.init_policy == RANDOM
    assert spec.restarts == 4
    assert spec.sigma_n2 == (0.01,)


def test_spec_from_dict_sections(tmp_path):
    spec = spec_from_dict(
        {
            "grid": {"shapes": [[2, 4]], "p_grid": [1, 2]},
            "init": {"policy": FILE, "matrix_dir": str(tmp_path)},
            "optimizer": {"max_iters": 10},
            "monte_carlo": {"num_samples": 100},
            "workers": 2,
        }
    )

    assert spec.shapes == ((2, 4),)
    assert spec.p_grid == (1.0, 2.0)
    assert spec.optimizer == OptimizerParams(max_iters=10)
    assert spec.monte_carlo == McConfig(num_samples=100)
    assert spec.matrix_path(2, 4) == tmp_path / "2x4.txt"
    assert spec.workers == 2


@pytest.mark.parametrize(
    "data",
    [
        {"grid": {"shape": [[3, 6]]}},
        {"init": {"policy": "scaled_etf", "restart": 2}},
        {"outdir": "x"},
        {"optimizer": {"eps": 1e-3}},
    ],
)
def test_spec_from_dict_rejects_unknown_keys(data):
    with pytest.raises((ValueError, TypeError)):
        spec_from_dict(data)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(init_policy="etf"),
        dict(init_policy=FILE),
        dict(restarts=0),
        dict(workers=0),
        dict(p_grid=(1.0, -1.0)),
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        ExperimentSpec(**kwargs)


def test_load_missing_config(tmp_path):
    with pytest.raises(OSError, match="missing.yaml"):
        load_experiment_spec(tmp_path / "missing.yaml")


def test_load_none_gives_defaults():
    assert load_experiment_spec(None).shapes == ExperimentSpec().shapes


def test_apply_overrides_routes_fields():
    spec = apply_overrides(
        ExperimentSpec(),
        {
            "K": 6,
            "seq_len": 3,
            "p_grid": [1, 2],
            "rel_tol": 1e-3,
            "num_samples": 500,
            "seed": 9,
            "init_seed": 9,
            "workers": 3,
            "output_dir": None,
        },
    )

    assert spec.shapes == ((3, 6),)
    assert spec.p_grid == (1.0, 2.0)
    assert spec.optimizer.rel_tol == 1e-3
    assert spec.optimizer.armijo_c == 0.5
    assert spec.monte_carlo.num_samples == 500
    assert spec.monte_carlo.seed == 9
    assert spec.init_seed == 9
    assert spec.workers == 3
    assert spec.output_dir == ExperimentSpec().output_dir


def test_apply_overrides_requires_shape_pair():
    with pytest.raises(ValueError):
        apply_overrides(ExperimentSpec(), {"K": 6})
