"""
Empirical Aubin-Property Probe

Estimates the local Lipschitz modulus of the solution map at the reference
point by sampling. For every radius r:

1. a pool of parameters w_1..w_K is drawn uniformly around w_bar, each block
   within max-norm r / #blocks so the product norm stays <= r;
2. for every member, solutions u' of F(w_k) in B(u_bar, r) are sampled and
   F(w_k) is discretised on a larger ball (the oracle);
3. for each ordered pair (j, k) the ratio max_u' dist(u', F(w_j)) / |w_j - w_k|
   is evaluated with a KD-tree over the oracle points.

The estimate is the largest ratio. The same normalised draws are reused at
every radius, so estimates at different radii differ only through the
geometry of the solution map. Discretisation overestimates distances, which
biases the probe towards flagging instability.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from sklearn.neighbors import KDTree

from src.certifier import ProblemInstance, Verdict, check_feasible
from src.config import ProbeConfig, probe_config, resolve_seed
from src.feasibility import decision_dim, repair, unit_ball_draws

logger = logging.getLogger(__name__)

GENERATOR = "numpy.random.PCG64"


class ProbeLabel(str, Enum):
    CONSISTENT = "CONSISTENT"
    INCONSISTENT = "INCONSISTENT"
    INSUFFICIENT = "INSUFFICIENT"


class RadiusResult(BaseModel):
    """Per-radius bookkeeping."""

    radius: float
    estimate: Optional[float] = None
    pairs: int = 0
    solution_samples: int = 0
    oracle_samples: int = 0
    oracle_radius: Optional[float] = None
    error: Optional[str] = None


class ModulusEstimate(BaseModel):
    radii: List[float]
    estimates: List[Optional[float]]
    sample_counts: List[int]
    seed: int
    generator: str = GENERATOR
    blowup_factor: Optional[float] = None
    threshold: float = Field(description="Blow-up decision boundary")
    errors: List[str] = Field(default_factory=list)
    details: List[RadiusResult] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        """One row per radius."""
        return pd.DataFrame([d.model_dump() for d in self.details]).set_index("radius")


def consistency_label(verdict: Verdict, estimate: ModulusEstimate) -> ProbeLabel:
    """
    Compare probe evidence with a certifier verdict.

    LipschitzLike expects blowup <= threshold, NotLipschitzLike expects
    blowup >= threshold; missing estimates and Inconclusive verdicts give
    INSUFFICIENT.
    """
    if estimate.blowup_factor is None or verdict == Verdict.INCONCLUSIVE:
        return ProbeLabel.INSUFFICIENT
    if verdict == Verdict.LIPSCHITZ_LIKE:
        ok = estimate.blowup_factor <= estimate.threshold
    else:
        ok = estimate.blowup_factor >= estimate.threshold
    return ProbeLabel.CONSISTENT if ok else ProbeLabel.INCONSISTENT


def parameter_norm(blocks: List[np.ndarray]) -> float:
    """Sum of entrywise max-norms of the parameter blocks."""
    return float(sum(np.max(np.abs(b)) if b.size else 0.0 for b in blocks))


class _Draws(BaseModel):
    """Normalised random numbers shared by all radii."""

    model_config = {"arbitrary_types_allowed": True}

    parameters: List[List[np.ndarray]]
    solutions: np.ndarray
    oracle: np.ndarray


def _draw(p: ProblemInstance, rng: np.random.Generator, samples: int, config: ProbeConfig) -> _Draws:
    d = decision_dim(p)
    pool = config.pool_size
    parameters = [[rng.uniform(-1.0, 1.0, size=b.shape) for b in p.parameter_blocks] for _ in range(pool)]
    solutions = np.stack([unit_ball_draws(rng, samples, d) for _ in range(pool)])
    oracle = np.stack([unit_ball_draws(rng, samples * config.oracle_factor, d) for _ in range(pool)])
    return _Draws(parameters=parameters, solutions=solutions, oracle=oracle)


def _probe_radius(p: ProblemInstance, radius: float, draws: _Draws, config: ProbeConfig) -> RadiusResult:
    blocks = p.parameter_blocks
    step = radius / len(blocks)
    u_bar = p.reference
    members = [
        [w + step * dw for w, dw in zip(blocks, deltas)] for deltas in draws.parameters
    ]
    instances = [p.with_parameters(*w) for w in members]
    result = RadiusResult(radius=radius)

    solutions = [
        repair(q, u_bar + radius * draws.solutions[k], u_bar, radius) for k, q in enumerate(instances)
    ]
    result.solution_samples = int(sum(s.shape[0] for s in solutions))

    trees: List[Optional[KDTree]] = []
    rho_used = 0.0
    for j, q in enumerate(instances):
        rho = config.oracle_radius_factor * radius
        points = np.empty((0, u_bar.size))
        for _ in range(config.oracle_max_doublings + 1):
            if draws.oracle.shape[1] == 0:
                break
            points = repair(q, u_bar + rho * draws.oracle[j], u_bar, rho)
            if points.shape[0]:
                break
            rho *= 2.0
        result.oracle_samples += int(points.shape[0])
        rho_used = max(rho_used, rho)
        trees.append(KDTree(points) if points.shape[0] else None)
    result.oracle_radius = rho_used

    best = None
    for j, tree in enumerate(trees):
        if tree is None:
            continue
        for k, sample in enumerate(solutions):
            if j == k or sample.shape[0] == 0:
                continue
            gap = parameter_norm([a - b for a, b in zip(members[j], members[k])])
            if gap == 0.0:
                continue
            distances, _ = tree.query(sample, k=1)
            ratio = float(distances.max()) / gap
            best = ratio if best is None else max(best, ratio)
            result.pairs += 1

    if best is None:
        result.error = f"radius {radius:g}: no usable (solution sample, oracle) pair"
        logger.warning(result.error)
    else:
        result.estimate = best
        logger.info(f"radius {radius:g}: estimate {best:.4g} over {result.pairs} pairs")
    return result


def estimate_modulus(
    p: ProblemInstance,
    radii: Optional[List[float]] = None,
    samples_per_radius: Optional[int] = None,
    seed: Optional[int] = None,
    config: Optional[ProbeConfig] = None,
) -> ModulusEstimate:
    """
    Empirical Lipschitz-modulus estimates over decreasing radii.

    Args:
        p: Instance with a feasible reference point.
        radii: Strictly decreasing positive radii (config default otherwise).
        samples_per_radius: Solution candidates per pool member.
        seed: PCG64 seed; resolve_seed() decides when omitted.
        config: Probe settings; probe_config by default.

    Returns:
        ModulusEstimate; radii without a usable pair have estimate None and an
        entry in `errors`, and blowup_factor needs both end estimates.

    Raises:
        InfeasibleReferencePointError: If the reference point is not a solution.
    """
    overrides = {}
    if radii is not None:
        overrides["radii"] = list(radii)
    if samples_per_radius is not None:
        overrides["samples_per_radius"] = samples_per_radius
    config = (config or probe_config).model_copy(update=overrides)
    config = ProbeConfig.model_validate(config.model_dump())
    seed = resolve_seed(seed)
    check_feasible(p)

    rng = np.random.Generator(np.random.PCG64(seed))
    draws = _draw(p, rng, config.samples_per_radius, config)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            details = list(pool.map(lambda r: _probe_radius(p, r, draws, config), config.radii))
    else:
        details = [_probe_radius(p, r, draws, config) for r in config.radii]

    estimates = [d.estimate for d in details]
    blowup = None
    if estimates and estimates[0] and estimates[-1] is not None:
        blowup = estimates[-1] / estimates[0]
    estimate = ModulusEstimate(
        radii=config.radii,
        estimates=estimates,
        sample_counts=[d.solution_samples for d in details],
        seed=seed,
        blowup_factor=blowup,
        threshold=config.blowup_threshold,
        errors=[d.error for d in details if d.error],
        details=details,
    )
    logger.info(f"probe finished: blowup factor {blowup}")
    return estimate
