"""Module driving p-sweeps of optimized transmit sequences against baselines"""

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from functools import partial
from pathlib import Path
from time import perf_counter

import lazy_loader as lazy
from tqdm import tqdm

from aircomp.frames.frames import FrameSpec, frame_from_spec, optimal_scale, random_init
from aircomp.kron.kron import kron_decompose_symmetric, truncate
from aircomp.moments.moments import SystemConfig, build_moments
from aircomp.objective.objective import objective
from aircomp.optimize.optimizer import CONVERGED, OptimizerTrace, gradient_descent
from aircomp.simulate.simulator import empirical_mse
from aircomp.utils.config import (
    FILE,
    INIT_POLICIES,
    RANDOM,
    apply_overrides,
    load_experiment_spec,
)
from aircomp.utils.linalg import max_column_power, total_power
from aircomp.utils.matrix_io import FLOAT_FORMAT, save_matrix

# Implement lazy loading of certain large external modules. This is mostly so
# that package imports occur after parsing command line input in order to
# serve the --help menu quickly if necessary.
np = lazy.load("numpy")
pd = lazy.load("pandas")

SKIPPED = "skipped"

# Plot-data series: scaled initial matrix and its optimum
METHODS = ("init", "opt")


@dataclass(frozen=True)
class SweepRecord:
    """One row of the sweep CSV; field order is the column order"""

    p: float
    K: int
    seq_len: int
    sigma_x2: float
    sigma_n2: float
    J_analytic_init: float
    J_analytic_opt: float
    J_mc_init: float
    J_mc_opt: float
    mc_std_error_init: float
    mc_std_error_opt: float
    iterations: int
    termination_reason: str
    init_total_power: float
    opt_total_power: float
    opt_max_column_power: float
    init_max_column_power: float
    init_policy: str
    init_seed: int


RECORD_FIELDS = [f.name for f in fields(SweepRecord)]


@dataclass
class PointResult:
    """Everything a grid point produces; written out by the caller"""

    record: SweepRecord
    tag: str
    S_init: object = None
    S_opt: object = None
    trace: OptimizerTrace = None

    @property
    def failed(self):
        return self.record.termination_reason.startswith(SKIPPED)


def _skipped(point, spec, reason):
    nan = float("nan")
    record = SweepRecord(
        p=point.p,
        K=point.K,
        seq_len=point.seq_len,
        sigma_x2=point.sigma_x2,
        sigma_n2=point.sigma_n2,
        J_analytic_init=nan,
        J_analytic_opt=nan,
        J_mc_init=nan,
        J_mc_opt=nan,
        mc_std_error_init=nan,
        mc_std_error_opt=nan,
        iterations=-1,
        termination_reason=f"{SKIPPED}: {reason}",
        init_total_power=nan,
        opt_total_power=nan,
        opt_max_column_power=nan,
        init_max_column_power=nan,
        init_policy=spec.init_policy,
        init_seed=-1,
    )

    return PointResult(record=record, tag=point.tag)


def initial_matrices(point, spec):
    """Unscaled starting matrices of a grid point as (seed, S0) pairs

    Deterministic sources carry seed -1.
    """

    if spec.init_policy == RANDOM:
        return [
            (seed, random_init(point.seq_len, point.K, spec.init_scale, seed))
            for seed in range(spec.init_seed, spec.init_seed + spec.restarts)
        ]

    if spec.init_policy == FILE:
        frame = FrameSpec(
            seq_len=point.seq_len,
            num_vectors=point.K,
            source=str(spec.matrix_path(point.seq_len, point.K)),
        )
    else:
        frame = FrameSpec.builtin(point.seq_len, point.K)

    return [(-1, frame_from_spec(frame))]


def _descend(S0, moments, kron, spec):
    """Scale S0 optimally, then run gradient descent from it

    The returned matrix is never worse than the scaled start under the full
    objective, even when `kron` is truncated.
    """

    init = optimal_scale(S0, moments)

    if not np.any(init.S):
        # The best point on the ray is the stationary origin
        trace = OptimizerTrace(termination_reason=CONVERGED)
        return init, init.S, trace, init.J

    S_opt, trace = gradient_descent(init.S, moments, kron, spec.optimizer)
    J_opt = objective(S_opt, moments)

    # A truncated factorization descends a surrogate; the full J decides
    if J_opt > init.J:
        logging.info(
            "Descent on the truncated objective ended above the start "
            "(%s > %s); keeping the scaled initial matrix",
            J_opt,
            init.J,
        )
        return init, init.S, trace, init.J

    return init, S_opt, trace, J_opt


def run_point(point, spec):
    """Baseline, optimization and Monte Carlo validation for one grid point

    Parameters
    ----------
    point : GridPoint
        Shape, statistics and exponent of the point

    spec : ExperimentSpec
        Initialization policy and solver settings

    Returns
    -------
    result : PointResult
        The sweep record with the initial and optimized matrices and the
        optimizer trace. Points that cannot be set up (no ETF for the shape,
        missing matrix file, invalid parameters) yield a skipped record.
    """

    logging.info("Starting grid point %s", point.tag)

    try:
        config = SystemConfig(
            num_nodes=point.K,
            seq_len=point.seq_len,
            p=point.p,
            sigma_x2=point.sigma_x2,
            sigma_n2=point.sigma_n2,
        )
        moments = build_moments(config)
        kron = truncate(kron_decompose_symmetric(moments.Mmat), spec.kron_rel_tol)
        starts = initial_matrices(point, spec)

        best = None
        for seed, S0 in starts:
            init, S_opt, trace, J_opt = _descend(S0, moments, kron, spec)
            logging.debug("Start seed %s: J %s -> %s", seed, init.J, J_opt)

            if best is None or J_opt < best[4]:
                best = (seed, init, S_opt, trace, J_opt)
    except (ValueError, OSError, np.linalg.LinAlgError) as err:
        logging.warning("Skipping grid point %s: %s", point.tag, err)
        return _skipped(point, spec, err)

    seed, init, S_opt, trace, J_opt = best

    mc_init = empirical_mse(init.S, config, spec.monte_carlo)
    mc_opt = empirical_mse(S_opt, config, spec.monte_carlo)

    record = SweepRecord(
        p=point.p,
        K=point.K,
        seq_len=point.seq_len,
        sigma_x2=point.sigma_x2,
        sigma_n2=point.sigma_n2,
        J_analytic_init=init.J,
        J_analytic_opt=J_opt,
        J_mc_init=mc_init.mean_sq_error,
        J_mc_opt=mc_opt.mean_sq_error,
        mc_std_error_init=mc_init.std_error,
        mc_std_error_opt=mc_opt.std_error,
        iterations=max(len(trace) - 1, 0),
        termination_reason=trace.termination_reason,
        init_total_power=total_power(init.S),
        opt_total_power=total_power(S_opt),
        opt_max_column_power=max_column_power(S_opt),
        init_max_column_power=max_column_power(init.S),
        init_policy=spec.init_policy,
        init_seed=seed,
    )

    logging.info(
        "Finished grid point %s: J %s -> %s (%s)",
        point.tag,
        init.J,
        J_opt,
        trace.termination_reason,
    )

    return PointResult(
        record=record, tag=point.tag, S_init=init.S, S_opt=S_opt, trace=trace
    )


def run_sweep(spec, progress=None):
    """Evaluate every grid point of an experiment

    Parameters
    ----------
    spec : ExperimentSpec
        The experiment

    progress : callable, default=None
        Wrapper around the result iterator, e.g. tqdm

    Returns
    -------
    results : list of PointResult
        In grid order, independent of the number of workers
    """

    points = spec.grid_points()
    run = partial(run_point, spec=spec)

    if progress is None:

        def progress(x, **kwargs):
            return x

    if spec.workers > 1:
        logging.debug("Begin parallel processing of %s grid points", len(points))
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(progress(pool.map(run, points), total=len(points)))

    logging.debug("Begin serial processing of %s grid points", len(points))
    return list(progress(map(run, points), total=len(points)))


def _sorted_records(records):
    return sorted(records, key=lambda r: (r.K, r.seq_len, r.sigma_n2, r.p, r.sigma_x2))


def emit_csv(records, path):
    """Write sweep records as CSV

    One header row with the SweepRecord field names, one row per record,
    sorted by (K, seq_len, sigma_n2, p), floats with 17 significant digits.
    """

    frame = pd.DataFrame(
        [asdict(r) for r in _sorted_records(records)], columns=RECORD_FIELDS
    )

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="nan")
    except OSError as err:
        raise OSError(f"Could not write sweep CSV to {path}: {err}") from err

    logging.info("Wrote %s records to %s", len(records), path)

    return path


def _log10_or_sentinel(value, label):
    if value > 0 and math.isfinite(value):
        return math.log10(value)

    logging.warning("log10 undefined for J=%s (%s); writing nan", value, label)

    return float("nan")


def emit_plotdata(records, out_dir):
    """Write (p, log10 J) series for every grid cell, method and variant

    A cell is a (K, seq_len, sigma_x2, sigma_n2) combination. For each cell
    four two-column files are written: methods "init" (scaled initial
    matrix) and "opt" (optimized), each in an "analytic" and an "mc"
    variant.

    Returns
    -------
    paths : list of pathlib.Path
    """

    if not records:
        raise ValueError("No records to write plot data for")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    cells = {}
    for record in _sorted_records(records):
        key = (record.K, record.seq_len, record.sigma_x2, record.sigma_n2)
        cells.setdefault(key, []).append(record)

    paths = []
    for (K, seq_len, sx2, sn2), rows in cells.items():
        rows = sorted(rows, key=lambda r: r.p)
        for method in METHODS:
            for variant, prefix in (("analytic", "J_analytic"), ("mc", "J_mc")):
                name = f"K{K}_M{seq_len}_sx2_{sx2:g}_sn2_{sn2:g}_{method}_{variant}"
                values = [getattr(r, f"{prefix}_{method}") for r in rows]
                series = np.array(
                    [
                        [r.p, _log10_or_sentinel(value, name)]
                        for r, value in zip(rows, values)
                    ]
                )

                path = out_dir / f"{name}.dat"
                np.savetxt(path, series, fmt=FLOAT_FORMAT, header="p log10_J")
                paths.append(path)

    logging.info("Wrote %s plot-data series to %s", len(paths), out_dir)

    return paths


def write_outputs(results, out_dir):
    """Write the CSV, plot data, matrices and traces of a sweep in grid order"""

    out_dir = Path(out_dir)

    for result in results:
        if result.failed:
            continue

        save_matrix(result.S_init, out_dir / "matrices" / f"{result.tag}_init.txt")
        save_matrix(result.S_opt, out_dir / "matrices" / f"{result.tag}_opt.txt")

        trace_path = out_dir / "traces" / f"{result.tag}.csv"
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        result.trace.to_frame().to_csv(
            trace_path, index=False, float_format=FLOAT_FORMAT
        )

    records = [result.record for result in results]
    emit_csv(records, out_dir / "sweep.csv")
    if records:
        emit_plotdata(records, out_dir / "plotdata")


def parse_args(argv=None):
    """Parse Command Line Arguments and enforce any necessary conditions"""
    parser = argparse.ArgumentParser(
        description="Optimize transmit sequences for l_p-norm computation over a "
        "multiple-access channel and compare against scaled ETF baselines",
    )

    parser.add_argument(
        "config",
        help="YAML experiment configuration (defaults are used if omitted)",
        nargs="?",
        default=None,
    )

    parser.add_argument(
        "--out", help="output directory", default=None, dest="output_dir"
    )

    parser.add_argument(
        "--K", help="number of nodes (together with --seq-len)", type=int, dest="K"
    )
    parser.add_argument(
        "--seq-len",
        help="sequence length (together with --K)",
        type=int,
        dest="seq_len",
    )
    parser.add_argument(
        "--p-grid",
        help="norm exponents to sweep",
        type=float,
        nargs="+",
        dest="p_grid",
    )
    parser.add_argument(
        "--sigma-x2", help="signal variances", type=float, nargs="+", dest="sigma_x2"
    )
    parser.add_argument(
        "--sigma-n2", help="noise variances", type=float, nargs="+", dest="sigma_n2"
    )

    parser.add_argument(
        "--mc-samples",
        help="Monte Carlo samples per estimate",
        type=int,
        dest="num_samples",
    )
    parser.add_argument(
        "--seed", help="seed of Monte Carlo streams and random starts", type=int
    )

    parser.add_argument(
        "--eps", help="relative stopping threshold", type=float, dest="rel_tol"
    )
    parser.add_argument(
        "--armijo-c",
        help="Armijo sufficient-decrease constant",
        type=float,
        dest="armijo_c",
    )
    parser.add_argument(
        "--max-iters",
        help="maximum gradient descent iterations",
        type=int,
        dest="max_iters",
    )

    parser.add_argument(
        "--init-policy",
        help="initialization of the optimizer",
        choices=INIT_POLICIES,
        dest="init_policy",
    )
    parser.add_argument(
        "--matrix-dir",
        help="directory of initial matrices named {seq_len}x{K}.txt (file policy)",
        dest="matrix_dir",
    )
    parser.add_argument(
        "--restarts", help="number of seeded random starts", type=int, dest="restarts"
    )
    parser.add_argument(
        "--kron-tol",
        help="relative truncation threshold of the Kronecker factorization",
        type=float,
        dest="kron_rel_tol",
    )
    parser.add_argument(
        "--workers", help="processes used for grid points", type=int, dest="workers"
    )

    parser.add_argument(
        "-d",
        "--debug",
        help="Print lots of debugging statements",
        action="store_const",
        dest="loglevel",
        const=logging.DEBUG,
        default=logging.WARNING,
    )

    parser.add_argument(
        "-v",
        "--verbose",
        help="increase output verbosity",
        action="store_const",
        dest="loglevel",
        const=logging.INFO,
    )

    parser.add_argument(
        "-p",
        "--progress-bar",
        help="Show a progress bar over grid points",
        action="store_true",
        dest="progressbar",
    )

    args = parser.parse_args(argv)

    if (args.K is None) != (args.seq_len is None):
        parser.error("--K and --seq-len must be given together")

    return args


def setup_logger(loglevel):

    logging.basicConfig(
        format="[%(asctime)s %(levelname)s] %(message)s", level=loglevel
    )
    logging.info("Logging Initialized.")

    return


def main(argv=None):
    start_time = perf_counter()

    # -------------------------------------------------------------------------
    # Parse command line args and resolve the experiment
    # -------------------------------------------------------------------------

    args = parse_args(argv)

    setup_logger(args.loglevel)

    overrides = {
        name: getattr(args, name)
        for name in (
            "output_dir",
            "K",
            "seq_len",
            "p_grid",
            "sigma_x2",
            "sigma_n2",
            "num_samples",
            "seed",
            "rel_tol",
            "armijo_c",
            "max_iters",
            "init_policy",
            "matrix_dir",
            "restarts",
            "kron_rel_tol",
            "workers",
        )
    }
    overrides["init_seed"] = args.seed

    try:
        spec = apply_overrides(load_experiment_spec(args.config), overrides)
    except (ValueError, OSError) as err:
        logging.error("Invalid experiment: %s", err)
        return 2

    logging.info("Progress Bar: %s", args.progressbar)
    logging.info("Shapes (seq_len, K): %s", spec.shapes)
    logging.info("sigma_x2: %s, sigma_n2: %s", spec.sigma_x2, spec.sigma_n2)
    logging.info("p grid: %s", spec.p_grid)
    logging.info("Init policy: %s (%s restarts)", spec.init_policy, spec.restarts)
    logging.info("Optimizer: %s", spec.optimizer)
    logging.info("Monte Carlo: %s", spec.monte_carlo)
    logging.info("Output directory: %s", spec.output_dir)

    progress = tqdm if args.progressbar else None

    # -------------------------------------------------------------------------
    # Evaluate the grid and write the results
    # -------------------------------------------------------------------------

    results = run_sweep(spec, progress=progress)
    write_outputs(results, spec.output_dir)

    failed = [result.tag for result in results if result.failed]
    if failed:
        logging.warning(
            "%s of %s grid points failed: %s", len(failed), len(results), failed
        )

    logging.info("Done. Elapsed time in seconds: %s", perf_counter() - start_time)

    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
