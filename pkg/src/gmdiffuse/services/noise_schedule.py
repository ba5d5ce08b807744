"""
Noise Schedule Service
Version: 1.0.0

Builds the variance-exploding time grid t_1 < ... < t_N = T used by both the
learning loop and the reverse sampler.

Construction:
    T     = (M2 + n) / eps^2
    kappa = eps^2 / (M2 + n ln(T + 1))
    t_1   = eps^2 sigma0^2 / (2 sqrt(n))

Times are generated downward from T with the step rule held at equality,

    t_k + 1 = (t_{k+1} + 1) max{e^{-2 kappa}, (t_{k+1} + 1)^{-kappa}},

until the next value would fall below t_1, then t_1 is appended exactly.
Per-time score error budgets are eps_k^2 = eps^2 (t_k + 1) / ln(T + 1).

The reverse step coefficient uses the +1 form
c = 2[(t_next + 1) - sqrt((t_prev + 1)(t_next + 1))], whose small-gap limit
reproduces the continuous reverse drift 2 s dt.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from gmdiffuse.core.errors import InvalidParameterError, ScheduleError
from gmdiffuse.schemas.schedule import KLBoundReport, NoiseSchedule


logger = logging.getLogger(__name__)

# Relative slack when re-checking equalities that were computed in floating point
CHECK_TOLERANCE = 1e-12


def terminal_time(eps: float, n: int, M2: float) -> float:
    return (M2 + n) / eps ** 2


def schedule_kappa(eps: float, n: int, M2: float) -> float:
    return eps ** 2 / (M2 + n * math.log1p(terminal_time(eps, n, M2)))


def first_time(eps: float, sigma0_sq: float, n: int) -> float:
    return eps ** 2 * sigma0_sq / (2.0 * math.sqrt(n))


def step_factor(t: float, kappa: float) -> float:
    """max{e^{-2 kappa}, (t + 1)^{-kappa}}: the allowed contraction of t + 1 from time t."""
    return max(math.exp(-2.0 * kappa), (t + 1.0) ** (-kappa))


def step_down(t: float, kappa: float) -> float:
    """Next smaller time under the step rule held at equality."""
    return (t + 1.0) * step_factor(t, kappa) - 1.0


def build_schedule(eps: float, sigma0_sq: float, n: int, M2: float) -> NoiseSchedule:
    """
    Construct the noise schedule for target accuracy eps.

    Args:
        eps: Target accuracy in (0, 1/2]
        sigma0_sq: Base noise variance of the data
        n: Dimension
        M2: Second moment E||x||^2 of the data

    Returns:
        NoiseSchedule: times from t_1 to T with kappa and budgets

    Raises:
        ScheduleError: If eps is outside (0, 1/2] or T <= t_1
    """
    if not 0.0 < eps <= 0.5:
        raise ScheduleError(f"eps must be in (0, 0.5], got {eps}")
    if sigma0_sq <= 0:
        raise ScheduleError(f"sigma0_sq must be positive, got {sigma0_sq}")
    if n < 1:
        raise ScheduleError(f"n must be >= 1, got {n}")
    if M2 < 0 or not math.isfinite(M2):
        raise ScheduleError(f"M2 must be finite and nonnegative, got {M2}")

    T = terminal_time(eps, n, M2)
    kappa = schedule_kappa(eps, n, M2)
    t1 = first_time(eps, sigma0_sq, n)
    if T <= t1:
        raise ScheduleError(f"terminal time T={T} does not exceed t_1={t1}", T=T, t1=t1)

    descending: List[float] = [T]
    t = T
    while True:
        nxt = step_down(t, kappa)
        if nxt <= t1:
            break
        descending.append(nxt)
        t = nxt
    descending.append(t1)

    times = descending[::-1]
    log_T1 = math.log1p(T)
    budgets = [eps ** 2 * (tk + 1.0) / log_T1 for tk in times]

    if len(times) >= 2:
        required = step_down(times[1], kappa)
        logger.info(
            f"[INFO] Final clamp to t_1={t1:.6g}: step rule asks for {required:.6g} "
            f"(ratio deficit {(required + 1.0) / (t1 + 1.0) - 1.0:.3e})"
        )

    bound = 5.0 / kappa * math.log((T + 1.0) / t1)
    if len(times) > bound:
        logger.warning(f"[WARN] Schedule length {len(times)} exceeds 5/kappa ln((T+1)/t_1) = {bound:.1f}")

    logger.info(
        f"[OK] Built schedule: N={len(times)}, T={T:.6g}, kappa={kappa:.6g}, t_1={t1:.6g}"
    )
    return NoiseSchedule(
        times=times,
        kappa=kappa,
        T=T,
        eps_budgets=budgets,
        M2=M2,
        n=n,
        eps=eps,
        sigma0_sq=sigma0_sq,
    )


def check_schedule(schedule: NoiseSchedule) -> List[str]:
    """
    Re-verify the quantitative schedule invariants.

    The final pair (t_1, t_2) is exempt from the step rule (t_1 is clamped).

    Returns:
        list: Human-readable violations; empty when the schedule is valid
    """
    problems: List[str] = []
    times = schedule.times
    eps, n, kappa = schedule.eps, schedule.n, schedule.kappa

    t1 = first_time(eps, schedule.sigma0_sq, n)
    if abs(times[0] - t1) > CHECK_TOLERANCE * max(1.0, t1):
        problems.append(f"t_1={times[0]!r} differs from eps^2 sigma0^2/(2 sqrt(n))={t1!r}")

    for k in range(1, len(times) - 1):
        lower, upper = times[k], times[k + 1]
        required = (upper + 1.0) * step_factor(upper, kappa)
        if lower + 1.0 < required * (1.0 - CHECK_TOLERANCE):
            problems.append(f"step rule violated between t_{k + 1}={lower!r} and t_{k + 2}={upper!r}")

    bound = 5.0 / kappa * math.log((schedule.T + 1.0) / times[0])
    if schedule.N > bound:
        problems.append(f"length {schedule.N} exceeds 5/kappa ln((T+1)/t_1)={bound:.6g}")

    log_T1 = math.log1p(schedule.T)
    for k, (tk, budget) in enumerate(zip(times, schedule.eps_budgets)):
        if budget > eps ** 2 * (tk + 1.0) / log_T1 * (1.0 + CHECK_TOLERANCE):
            problems.append(f"budget {k + 1} exceeds eps^2 (t_k+1)/ln(T+1)")
            break

    return problems


def reverse_step_coefficient(t_prev: float, t_next: float) -> float:
    """
    c = 2[(t_next + 1) - sqrt((t_prev + 1)(t_next + 1))] for 0 <= t_prev <= t_next.

    Evaluated as 2 sqrt(b) (b - a) / (sqrt(a) + sqrt(b)) with a = t_prev + 1,
    b = t_next + 1, which has no cancellation at small gaps.

    Raises:
        InvalidParameterError: If t_prev > t_next or t_prev < 0
    """
    if t_prev > t_next:
        raise InvalidParameterError(f"t_prev={t_prev} exceeds t_next={t_next}")
    if t_prev < 0:
        raise InvalidParameterError(f"t_prev must be nonnegative, got {t_prev}")
    root_a = math.sqrt(t_prev + 1.0)
    root_b = math.sqrt(t_next + 1.0)
    return 2.0 * root_b * (t_next - t_prev) / (root_a + root_b)


def estimate_second_moment(samples) -> float:
    """Empirical mean of ||x||^2 over a sample batch."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise InvalidParameterError("cannot estimate M2 from an empty batch")
    M2 = float(np.mean(np.einsum("ij,ij->i", samples, samples)))
    logger.info(f"[INFO] Estimated M2={M2:.6g} from {samples.shape[0]} samples")
    return M2


def vp_times(schedule: NoiseSchedule) -> np.ndarray:
    """Variance-preserving clock of the same grid: t^x_k = ln(t_k + 1) / 2."""
    return 0.5 * np.log1p(schedule.time_array)


def kl_bound_terms(
    schedule: NoiseSchedule,
    score_errors: Optional[Sequence[float]] = None,
) -> KLBoundReport:
    """
    Evaluate the terms of the KL guarantee with unit constants.

    Args:
        schedule: Noise schedule
        score_errors: Optional measured E||grad ln p_t - s||^2, one per schedule
            time; the budgets eps_k^2 are used when absent

    Returns:
        KLBoundReport: initialization, score and discretization terms plus total
    """
    times = schedule.time_array
    if score_errors is None:
        errors = np.asarray(schedule.eps_budgets, dtype=float)
    else:
        errors = np.asarray(score_errors, dtype=float)
        if errors.shape != times.shape:
            raise InvalidParameterError(
                f"need one score error per schedule time ({times.size}), got {errors.size}"
            )

    n, M2, kappa, N, T = schedule.n, schedule.M2, schedule.kappa, schedule.N, schedule.T
    initialization = (n + M2) / (T + 1.0)
    log_ratios = np.log((times[1:] + 1.0) / (times[:-1] + 1.0))
    score = float(np.sum(log_ratios * errors[1:] / (times[:-1] + 1.0)))
    discretization_log = kappa * n * math.log1p(T)
    discretization_steps = kappa ** 2 * n * N
    discretization_moment = kappa * M2

    return KLBoundReport(
        initialization=initialization,
        score=score,
        discretization_log=discretization_log,
        discretization_steps=discretization_steps,
        discretization_moment=discretization_moment,
        total=initialization + score + discretization_log + discretization_steps + discretization_moment,
        used_measured_errors=score_errors is not None,
        levels=N,
    )


# Export schedule services
__all__ = [
    "terminal_time",
    "schedule_kappa",
    "first_time",
    "step_factor",
    "step_down",
    "build_schedule",
    "check_schedule",
    "reverse_step_coefficient",
    "estimate_second_moment",
    "vp_times",
    "kl_bound_terms",
]
