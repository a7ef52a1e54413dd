"""Gradient descent with Armijo backtracking over unconstrained sequence matrices"""

import logging
from dataclasses import dataclass, field
from functools import partial

import lazy_loader as lazy

from aircomp.objective.objective import check_sequence_matrix, gradient, objective
from aircomp.utils.errors import DomainError, LineSearchStalled

np = lazy.load("numpy")
pd = lazy.load("pandas")

# Below this objective value the relative stopping test is meaningless
ZERO_OBJECTIVE = 1e-30

CONVERGED = "converged"
MAX_ITERS = "max_iters"
STALLED = "stalled_line_search"


@dataclass(frozen=True)
class OptimizerParams:
    """Settings of the descent loop and its line search

    Parameters
    ----------
    rel_tol : float, default=1e-5
        Stop once (J_prev - J) < rel_tol * J

    armijo_c : float, default=0.5
        Sufficient-decrease constant c in (0, 1)

    max_iters : int, default=100000
        Maximum number of accepted steps T

    initial_step : float, default=1.0
        First step size tried by the line search

    backtrack_factor : float, default=0.5
        Step size reduction per backtrack, in (0, 1)

    max_backtracks : int, default=60
        Number of reductions before the line search gives up
    """

    rel_tol: float = 1e-5
    armijo_c: float = 0.5
    max_iters: int = 100_000
    initial_step: float = 1.0
    backtrack_factor: float = 0.5
    max_backtracks: int = 60

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")

        if not 0 < self.armijo_c < 1:
            raise ValueError(f"armijo_c must lie in (0, 1), got {self.armijo_c}")

        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")

        if not self.initial_step > 0:
            raise ValueError(f"initial_step must be positive, got {self.initial_step}")

        if not 0 < self.backtrack_factor < 1:
            raise ValueError(
                f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}"
            )

        if self.max_backtracks < 1:
            raise ValueError(
                f"max_backtracks must be positive, got {self.max_backtracks}"
            )


@dataclass(frozen=True)
class IterationRecord:
    """One row of an optimizer trace

    `step` is the step size that produced this iterate (0 for the initial
    point) and `grad_norm` the Frobenius norm of the gradient at it.
    """

    iteration: int
    objective: float
    step: float
    grad_norm: float


@dataclass
class OptimizerTrace:
    """Per-iteration history of a descent run"""

    iterations: list = field(default_factory=list)
    termination_reason: str = ""

    def __len__(self):
        return len(self.iterations)

    @property
    def objectives(self):
        return np.array([rec.objective for rec in self.iterations])

    def armijo_violations(self, c, slack=0.0):
        """Iterations whose step breaks J_t <= J_{t-1} - c mu_t ||grad J_{t-1}||^2"""

        violations = []
        for prev, rec in zip(self.iterations, self.iterations[1:]):
            bound = prev.objective - c * rec.step * prev.grad_norm**2
            if rec.objective > bound + slack:
                violations.append(rec.iteration)

        return violations

    def to_frame(self):
        """Trace as a pandas DataFrame, one row per iterate"""

        columns = ["iteration", "objective", "step", "grad_norm"]
        return pd.DataFrame(
            [[getattr(rec, col) for col in columns] for rec in self.iterations],
            columns=columns,
        )


@dataclass(frozen=True)
class ArmijoStep:
    """Accepted step of the backtracking line search"""

    step: float
    S_next: object
    J_next: float
    backtracks: int


def armijo_step(S, grad, J_current, params, evaluate):
    """Backtracking line search along the negative gradient

    Parameters
    ----------
    S : numpy.ndarray
        Current iterate

    grad : numpy.ndarray
        Nonzero gradient of the objective at `S`

    J_current : float
        Objective value at `S`

    params : OptimizerParams
        Supplies the step ladder initial_step * backtrack_factor^j,
        j = 0..max_backtracks, and the constant c

    evaluate : callable
        Maps a matrix to its objective value

    Returns
    -------
    step : ArmijoStep
        The largest ladder step mu with
        J(S - mu grad) <= J_current - c mu ||grad||_F^2

    Raises
    ------
    DomainError
        If `grad` is zero
    LineSearchStalled
        If no step on the ladder satisfies the criterion
    """

    grad_norm2 = float(np.sum(grad * grad))
    if grad_norm2 == 0:
        raise DomainError("Line search called with a zero gradient")

    step = params.initial_step
    for backtracks in range(params.max_backtracks + 1):
        S_trial = S - step * grad
        J_trial = evaluate(S_trial)

        if np.isfinite(J_trial) and (
            J_trial <= J_current - params.armijo_c * step * grad_norm2
        ):
            return ArmijoStep(
                step=step, S_next=S_trial, J_next=J_trial, backtracks=backtracks
            )

        step *= params.backtrack_factor

    raise LineSearchStalled(
        f"No step down to {step / params.backtrack_factor:.3e} satisfied the "
        f"Armijo criterion at J={J_current:.6e}"
    )


def gradient_descent(S0, moments, kron, params=None):
    """Minimize the analytic MSE by gradient descent with Armijo steps

    Parameters
    ----------
    S0 : numpy.ndarray
        Nonzero initial sequence matrix of shape (seq_len, K)

    moments : MomentSet
        Moments of the problem

    kron : KronFactorization
        Factorization of `moments.Mmat` used for both J and its gradient

    params : OptimizerParams, default=None
        Loop settings; defaults to OptimizerParams()

    Returns
    -------
    S_opt : numpy.ndarray
        Best iterate seen, J(S_opt) <= J(S0)

    trace : OptimizerTrace
        Objective values, step sizes and gradient norms per iterate

    Raises
    ------
    DomainError
        If S0 is the zero matrix, which is a stationary point of J

    Notes
    -----
    The loop continues while (J_prev - J) >= rel_tol * J and at most
    max_iters steps have been taken. It also ends as converged once J falls
    below 1e-30 or the gradient vanishes, and as stalled if the line search
    finds no acceptable step.
    """

    if params is None:
        params = OptimizerParams()

    S = check_sequence_matrix(S0, moments).copy()
    if not np.any(S):
        raise DomainError("Initial matrix is zero, a stationary point of the MSE")

    evaluate = partial(objective, moments=moments, kron=kron)
    take_gradient = partial(gradient, moments=moments, kron=kron)

    J = evaluate(S)
    grad = take_gradient(S)
    grad_norm = float(np.linalg.norm(grad))

    trace = OptimizerTrace(iterations=[IterationRecord(0, J, 0.0, grad_norm)])
    best_S, best_J = S, J
    t = 0

    while True:
        if J < ZERO_OBJECTIVE or grad_norm == 0:
            trace.termination_reason = CONVERGED
            break

        if t >= params.max_iters:
            trace.termination_reason = MAX_ITERS
            break

        try:
            accepted = armijo_step(S, grad, J, params, evaluate)
        except LineSearchStalled as err:
            logging.debug("%s", err)
            trace.termination_reason = STALLED
            break

        J_prev = J
        S, J = accepted.S_next, accepted.J_next
        t += 1

        grad = take_gradient(S)
        grad_norm = float(np.linalg.norm(grad))
        trace.iterations.append(IterationRecord(t, J, accepted.step, grad_norm))
        logging.debug(
            "iter %s: J=%s, step=%s, |grad|=%s", t, J, accepted.step, grad_norm
        )

        if J <= best_J:
            best_S, best_J = S, J

        if J_prev - J < params.rel_tol * J:
            trace.termination_reason = CONVERGED
            break

    logging.info(
        "Gradient descent ended (%s) after %s iterations: J %s -> %s",
        trace.termination_reason,
        t,
        trace.iterations[0].objective,
        best_J,
    )

    return best_S, trace
