"""Mean-variance robust design baseline: Monte Carlo moments and NSGA-II."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .densities import make_rng
from .models import RefittingSurrogate, ResponseModel


@dataclass(frozen=True)
class MomentSummary:
    """Population (divide-by-M) moments."""

    mean: float
    variance: float
    skewness: float
    count: int


def sample_moments(values) -> MomentSummary:
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 1:
        raise ValueError("need at least one value")
    mean = float(x.mean())
    dev = x - mean
    var = float(np.mean(dev * dev))
    # relative guard: round-off in the mean leaves ~eps**2 variance for constants
    if var <= (1e-14 * max(abs(mean), 1e-300)) ** 2:
        return MomentSummary(mean, 0.0, 0.0, x.size)
    skew = float(np.mean(dev**3) / var**1.5)
    return MomentSummary(mean, var, skew, x.size)


def design_moments(model: ResponseModel, s, omegas, surrogate: tuple[int, int] | None = None) -> MomentSummary:
    """Moments of ``f(s, omega_j)`` over the frozen samples, optionally through
    a ``(points, degree)`` response surface fit at ``s``."""
    omegas = np.asarray(getattr(omegas, "values", omegas), dtype=float)
    if surrogate is not None:
        model = RefittingSurrogate(model, *surrogate)
    return sample_moments(model.evaluate(s, omegas))


def objectives_from_moments(mom: MomentSummary, penalty: float = 1e6) -> tuple[float, float, bool]:
    """``(1/mean, variance, penalized)``; a non-positive mean gets ``penalty``."""
    if mom.mean <= 0:
        return penalty, mom.variance, True
    return 1.0 / mom.mean, mom.variance, False


def rdo_objectives(model: ResponseModel, s, omegas, penalty: float = 1e6,
                   surrogate: tuple[int, int] | None = None) -> tuple[float, float]:
    inv_mean, var, _ = objectives_from_moments(design_moments(model, s, omegas, surrogate), penalty)
    return inv_mean, var


# --- non-dominated sorting -----------------------------------------------


def dominates(a, b) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_sort(points) -> list[list[int]]:
    """Fronts of indices, best first (minimisation in every column)."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2:
        P = P.reshape(len(P), -1)
    n = P.shape[0]
    if n == 0:
        return []
    le = np.all(P[:, None, :] <= P[None, :, :], axis=2)
    lt = np.any(P[:, None, :] < P[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    fronts = []
    current = np.nonzero(count == 0)[0]
    while current.size:
        fronts.append(current.tolist())
        count = count - dom[current].sum(axis=0)
        count[current] = -1
        current = np.nonzero(count == 0)[0]
    return fronts


def crowding_distance(points) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    n, k = P.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for c in range(k):
        order = np.argsort(P[:, c], kind="stable")
        col = P[order, c]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


# --- NSGA-II -------------------------------------------------------------


@dataclass(frozen=True)
class NSGA2Config:
    population: int = 100
    generations: int = 35
    crossover_probability: float = 0.9
    mutation_probability: float | None = None  # None -> 1 / n per variable
    crossover_eta: float = 20.0
    mutation_eta: float = 20.0
    seed: int = 0
    penalty: float = 1e6

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise ValueError("population must be an even number >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")


@dataclass
class ArchiveMember:
    design: np.ndarray
    objectives: np.ndarray
    moments: MomentSummary | None = None
    penalized: bool = False


@dataclass
class ParetoArchive:
    members: list[ArchiveMember]
    generation: int
    best_history: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    evaluated: list[ArchiveMember] = field(default_factory=list)

    def objectives(self) -> np.ndarray:
        return np.array([m.objectives for m in self.members])

    def designs(self) -> np.ndarray:
        return np.array([m.design for m in self.members])


def _sbx(rng, p1, p2, lower, upper, eta, prob):
    """Simulated binary crossover with bound-aware spread (Deb & Agrawal)."""
    c1, c2 = p1.copy(), p2.copy()
    if rng.random() > prob:
        return c1, c2
    for i in range(p1.size):
        if rng.random() > 0.5 or abs(p1[i] - p2[i]) <= 1e-14 or upper[i] <= lower[i]:
            continue
        y1, y2 = min(p1[i], p2[i]), max(p1[i], p2[i])
        yl, yu = lower[i], upper[i]
        u = rng.random()
        children = []
        for beta in (1.0 + 2.0 * (y1 - yl) / (y2 - y1), 1.0 + 2.0 * (yu - y2) / (y2 - y1)):
            alpha = 2.0 - beta ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                betaq = (u * alpha) ** (1.0 / (eta + 1.0))
            else:
                betaq = (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
            children.append(betaq)
        a = 0.5 * ((y1 + y2) - children[0] * (y2 - y1))
        b = 0.5 * ((y1 + y2) + children[1] * (y2 - y1))
        a, b = min(max(a, yl), yu), min(max(b, yl), yu)
        if rng.random() <= 0.5:
            a, b = b, a
        c1[i], c2[i] = a, b
    return c1, c2


def _poly_mutation(rng, x, lower, upper, eta, prob):
    y = x.copy()
    for i in range(x.size):
        if rng.random() > prob or upper[i] <= lower[i]:
            continue
        yl, yu = lower[i], upper[i]
        d1, d2 = (y[i] - yl) / (yu - yl), (yu - y[i]) / (yu - yl)
        u = rng.random()
        mpow = 1.0 / (eta + 1.0)
        if u < 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
            dq = val**mpow - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
            dq = 1.0 - val**mpow
        y[i] = min(max(y[i] + dq * (yu - yl), yl), yu)
    return y


def _rank_and_crowd(F):
    rank = np.empty(len(F), dtype=int)
    crowd = np.empty(len(F))
    fronts = nondominated_sort(F)
    for r, fr in enumerate(fronts):
        rank[fr] = r
        crowd[fr] = crowding_distance(F[fr])
    return rank, crowd, fronts


def nsga2(evaluate, lower, upper, config: NSGA2Config | None = None) -> ParetoArchive:
    """Generic NSGA-II. ``evaluate(x)`` returns ``(objectives, extra)``
    where ``extra`` is stored on the archive member (may be None)."""
    cfg = config or NSGA2Config()
    lower = np.asarray(lower, dtype=float).ravel()
    upper = np.asarray(upper, dtype=float).ravel()
    n = lower.size
    pm = cfg.mutation_probability if cfg.mutation_probability is not None else 1.0 / n
    rng = make_rng(cfg.seed)
    evaluated: list[ArchiveMember] = []

    def assess(X):
        out = []
        for x in X:
            obj, extra = evaluate(x)
            mom, pen = extra if isinstance(extra, tuple) else (extra, False)
            m = ArchiveMember(x.copy(), np.asarray(obj, dtype=float), mom, pen)
            evaluated.append(m)
            out.append(m)
        return out

    X = lower + (upper - lower) * rng.random((cfg.population, n))
    pop = assess(X)
    F = np.array([m.objectives for m in pop])
    rank, crowd, _ = _rank_and_crowd(F)
    best = [F.min(axis=0)]

    def tournament():
        i, j = rng.integers(0, len(pop), 2)
        if rank[i] != rank[j]:
            return i if rank[i] < rank[j] else j
        if crowd[i] != crowd[j]:
            return i if crowd[i] > crowd[j] else j
        return i if rng.random() < 0.5 else j

    for _gen in range(cfg.generations):
        kids = []
        while len(kids) < cfg.population:
            a, b = pop[tournament()].design, pop[tournament()].design
            c1, c2 = _sbx(rng, a, b, lower, upper, cfg.crossover_eta, cfg.crossover_probability)
            kids.append(_poly_mutation(rng, c1, lower, upper, cfg.mutation_eta, pm))
            kids.append(_poly_mutation(rng, c2, lower, upper, cfg.mutation_eta, pm))
        union = pop + assess(np.array(kids))
        FU = np.array([m.objectives for m in union])
        _, _, fronts = _rank_and_crowd(FU)
        chosen: list[int] = []
        for fr in fronts:
            if len(chosen) + len(fr) <= cfg.population:
                chosen += fr
            else:
                cd = crowding_distance(FU[fr])
                order = np.argsort(-cd, kind="stable")
                chosen += [fr[k] for k in order[: cfg.population - len(chosen)]]
                break
        pop = [union[k] for k in chosen]
        F = FU[chosen]
        rank, crowd, _ = _rank_and_crowd(F)
        best.append(F.min(axis=0))

    first = nondominated_sort(F)[0]
    members = [pop[k] for k in sorted(first, key=lambda k: tuple(F[k]))]
    # duplicates survive the sort (equal points do not dominate); keep one copy
    uniq, seen = [], set()
    for m in members:
        key = m.design.tobytes()
        if key not in seen:
            seen.add(key)
            uniq.append(m)
    return ParetoArchive(uniq, cfg.generations, np.array(best), evaluated)


def nsga2_run(model: ResponseModel, bounds, omegas, config: NSGA2Config | None = None,
              surrogate: tuple[int, int] | None = None) -> ParetoArchive:
    """NSGA-II on ``(1 / mean, variance)`` of ``f(s, omega)`` over frozen samples."""
    cfg = config or NSGA2Config()
    omegas = np.asarray(getattr(omegas, "values", omegas), dtype=float)
    lower, upper = bounds

    def evaluate(x):
        mom = design_moments(model, x, omegas, surrogate)
        inv_mean, var, pen = objectives_from_moments(mom, cfg.penalty)
        return (inv_mean, var), (mom, pen)

    return nsga2(evaluate, lower, upper, cfg)
