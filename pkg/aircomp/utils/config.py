"""Utility functions for reading experiment configurations

An experiment is described by a YAML file with the sections ``grid``,
``init``, ``optimizer`` and ``monte_carlo`` plus a few top-level scalars;
see ``runscripts/configs/default_sweep.yaml``. Every key is optional and
falls back to the defaults below.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import lazy_loader as lazy

from aircomp.optimize.optimizer import OptimizerParams
from aircomp.simulate.simulator import McConfig

np = lazy.load("numpy")
yaml = lazy.load("yaml")

SCALED_ETF = "scaled_etf"
RANDOM = "random"
FILE = "file"
INIT_POLICIES = (SCALED_ETF, RANDOM, FILE)

DEFAULT_SHAPES = ((3, 6), (6, 16))
DEFAULT_SIGMA_X2 = (1.0,)
DEFAULT_SIGMA_N2 = (1e-3, 0.1)


def default_p_grid():
    """1e-3 followed by 19 evenly spaced points from 0.25 to 4"""

    return [1e-3] + [float(p) for p in np.linspace(0.25, 4.0, 19)]


@dataclass(frozen=True)
class GridPoint:
    """One (shape, statistics, exponent) combination of a sweep"""

    seq_len: int
    K: int
    p: float
    sigma_x2: float
    sigma_n2: float

    @property
    def tag(self):
        return (
            f"K{self.K}_M{self.seq_len}_sx2_{self.sigma_x2:g}"
            f"_sn2_{self.sigma_n2:g}_p{self.p:.6g}"
        )


@dataclass(frozen=True)
class ExperimentSpec:
    """Grid, initialization policy and solver settings of a sweep

    Parameters
    ----------
    shapes : tuple of (seq_len, K)
        Sequence-matrix shapes; each is combined with every variance and p

    sigma_x2, sigma_n2, p_grid : tuple of float
        Signal variances, noise variances and norm exponents

    init_policy : str, default="scaled_etf"
        "scaled_etf" (builtin ETFs), "random" (multi-start) or "file"
        (``<matrix_dir>/<seq_len>x<K>.txt``). The initial matrix is always
        scaled optimally before descent.

    restarts : int, default=1
        Number of seeded random starts; the best final J wins

    init_seed : int, default=0
        Seed of the first random start; start r uses init_seed + r

    init_scale : float, default=1.0
        Expected column norm of random starts

    matrix_dir : str, default=None
        Directory of initial matrices for the "file" policy

    optimizer : OptimizerParams
    monte_carlo : McConfig

    kron_rel_tol : float, default=0.0
        Relative truncation threshold of the Kronecker factorization

    output_dir : str, default="./out"
    workers : int, default=1
        Processes used to evaluate grid points
    """

    shapes: tuple = DEFAULT_SHAPES
    sigma_x2: tuple = DEFAULT_SIGMA_X2
    sigma_n2: tuple = DEFAULT_SIGMA_N2
    p_grid: tuple = field(default_factory=lambda: tuple(default_p_grid()))
    init_policy: str = SCALED_ETF
    restarts: int = 1
    init_seed: int = 0
    init_scale: float = 1.0
    matrix_dir: str = None
    optimizer: OptimizerParams = field(default_factory=OptimizerParams)
    monte_carlo: McConfig = field(default_factory=McConfig)
    kron_rel_tol: float = 0.0
    output_dir: str = "./out"
    workers: int = 1

    def __post_init__(self):
        if self.init_policy not in INIT_POLICIES:
            raise ValueError(
                f"init_policy={self.init_policy!r}; choose one of {INIT_POLICIES}"
            )

        if self.init_policy == FILE and self.matrix_dir is None:
            raise ValueError("init_policy='file' requires matrix_dir")

        if self.restarts < 1:
            raise ValueError(f"restarts must be positive, got {self.restarts}")

        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")

        if any(p <= 0 for p in self.p_grid):
            raise ValueError(f"p_grid must hold positive values, got {self.p_grid}")

    def grid_points(self):
        """All grid points in sweep order"""

        return [
            GridPoint(seq_len, K, p, sx2, sn2)
            for (seq_len, K), sx2, sn2, p in product(
                self.shapes, self.sigma_x2, self.sigma_n2, self.p_grid
            )
        ]

    def matrix_path(self, seq_len, K):
        """Initial matrix file of a shape under the "file" policy"""

        return Path(self.matrix_dir) / f"{seq_len}x{K}.txt"


def _as_tuple(values, cast=float):
    return tuple(cast(v) for v in values)


def spec_from_dict(data):
    """Build an ExperimentSpec from the nested dict of a YAML file"""

    data = dict(data or {})
    grid = data.pop("grid", {}) or {}
    init = data.pop("init", {}) or {}
    optimizer = data.pop("optimizer", {}) or {}
    monte_carlo = data.pop("monte_carlo", {}) or {}

    kwargs = {}

    if "shapes" in grid:
        kwargs["shapes"] = tuple((int(m), int(k)) for m, k in grid.pop("shapes"))
    for key in ("sigma_x2", "sigma_n2"):
        if key in grid:
            kwargs[key] = _as_tuple(grid.pop(key))
    if grid.get("p_grid") is not None:
        kwargs["p_grid"] = _as_tuple(grid.pop("p_grid"))
    grid.pop("p_grid", None)

    init_keys = {
        "policy": "init_policy",
        "restarts": "restarts",
        "seed": "init_seed",
        "scale": "init_scale",
        "matrix_dir": "matrix_dir",
    }
    for key, name in init_keys.items():
        if key in init:
            kwargs[name] = init.pop(key)

    kwargs["optimizer"] = OptimizerParams(**optimizer)
    kwargs["monte_carlo"] = McConfig(**monte_carlo)

    unknown = {**grid, **init}
    for key in ("kron_rel_tol", "output_dir", "workers"):
        if key in data:
            kwargs[key] = data.pop(key)
    unknown.update(data)

    if unknown:
        raise ValueError(f"Unknown configuration keys: {sorted(unknown)}")

    return ExperimentSpec(**kwargs)


def load_experiment_spec(path=None):
    """Read an ExperimentSpec from a YAML file; None gives the defaults"""

    if path is None:
        return ExperimentSpec()

    path = Path(path)
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except OSError as err:
        raise OSError(f"Could not read experiment config {path}: {err}") from err

    logging.info("Read experiment config from %s", path)

    return spec_from_dict(data)


def apply_overrides(spec, overrides):
    """Replace fields of `spec` with the non-None entries of `overrides`

    Keys naming OptimizerParams or McConfig fields are routed to the nested
    dataclasses; ``K`` and ``seq_len`` together replace the shape list.
    """

    overrides = {k: v for k, v in overrides.items() if v is not None}

    nested = {"optimizer": {}, "monte_carlo": {}}
    optimizer_fields = {f.name for f in dataclasses.fields(OptimizerParams)}
    mc_fields = {f.name for f in dataclasses.fields(McConfig)}

    for key in list(overrides):
        if key in optimizer_fields:
            nested["optimizer"][key] = overrides.pop(key)
        elif key in mc_fields:
            nested["monte_carlo"][key] = overrides.pop(key)

    K = overrides.pop("K", None)
    seq_len = overrides.pop("seq_len", None)
    if (K is None) != (seq_len is None):
        raise ValueError("--K and --seq-len must be given together")
    if K is not None:
        overrides["shapes"] = ((int(seq_len), int(K)),)

    for key in ("sigma_x2", "sigma_n2", "p_grid"):
        if key in overrides:
            overrides[key] = _as_tuple(overrides[key])

    if nested["optimizer"]:
        overrides["optimizer"] = dataclasses.replace(
            spec.optimizer, **nested["optimizer"]
        )
    if nested["monte_carlo"]:
        overrides["monte_carlo"] = dataclasses.replace(
            spec.monte_carlo, **nested["monte_carlo"]
        )

    return dataclasses.replace(spec, **overrides)
