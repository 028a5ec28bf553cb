"""Sampling separable Hawkes realisations and turning them into scenario data."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .exogenous import (Augmented, Exogenous, Impulse, MultiImpulse, exogenous_to_dict,
                        lhpp_from_counts)
from .kernels import Kernel

IMMIGRANT, OFFSPRING, UNLABELED = "immigrant", "offspring", "unlabeled"
SCENARIOS = "ABCDEF"
SEPARABLE = set("BCEF")


def make_rng(seed) -> np.random.Generator:
    """Counter-based Philox stream; accepts an int or a SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


def spawn_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


@dataclass(eq=False)
class EventSequence:
    times: np.ndarray
    labels: np.ndarray
    T: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.labels = np.asarray(self.labels, dtype="<U9").reshape(-1)
        if self.labels.size != self.times.size:
            raise ValueError("one label per event")
        order = np.argsort(self.times, kind="stable")
        self.times, self.labels = self.times[order], self.labels[order]
        if self.times.size and (self.times[0] <= 0 or self.times[-1] > self.T):
            raise ValueError(f"event times must lie in (0, {self.T}]")
        kinds = set(self.labels.tolist())
        if UNLABELED in kinds and len(kinds) > 1:
            raise ValueError("labeled and unlabeled events cannot be mixed")

    def __len__(self):
        return self.times.size

    @property
    def labeled(self) -> bool:
        return bool(self.times.size) and self.labels[0] != UNLABELED

    def select(self, label: str | None) -> np.ndarray:
        if label is None:
            return self.times
        return self.times[self.labels == label]

    def unlabel(self) -> "EventSequence":
        return EventSequence(self.times, np.full(self.times.size, UNLABELED), self.T)


@dataclass(eq=False)
class CensoredSeries:
    boundaries: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.boundaries = np.asarray(self.boundaries, dtype=float).reshape(-1)
        self.counts = np.asarray(self.counts, dtype=float).reshape(-1)
        b = self.boundaries
        if b.size < 2 or b[0] != 0 or np.any(np.diff(b) <= 0):
            raise ValueError("boundaries must start at 0 and strictly increase")
        if self.counts.size != b.size - 1:
            raise ValueError(f"{b.size} boundaries need {b.size - 1} counts")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")

    @property
    def T(self) -> float:
        return float(self.boundaries[-1])


def sample_immigrants(s: Exogenous, T: float, rng: np.random.Generator,
                      start: float = 0.0) -> np.ndarray:
    """Poisson process with intensity s on (start, T] by thinning under sup s."""
    atoms, _ = s.atoms()
    if isinstance(s, (Impulse, MultiImpulse)):
        return np.sort(atoms[(atoms > start) & (atoms <= T)])
    bound = s.sup(T)
    if not np.isfinite(bound):
        raise ValueError("exogenous intensity is unbounded on (0, T]")
    if bound <= 0 or T <= start:
        return np.zeros(0)
    n = rng.poisson(bound * (T - start))
    cand = np.sort(rng.uniform(start, T, n))
    keep = rng.uniform(0.0, bound, n) < s.eval(cand)
    # a draw exactly at the left edge has probability zero; drop it to stay half-open
    return cand[keep & (cand > start)]


def sample_offspring(k: Kernel, parents, T: float, rng: np.random.Generator) -> np.ndarray:
    """All descendants before T of the given parent times, generation by generation."""
    if k.branching_factor() >= 1:
        raise ValueError("cascade sampling needs a subcritical kernel (branching factor < 1)")
    gen = np.asarray(parents, dtype=float)
    out = []
    while gen.size:
        mass = k.integral(T - gen) if np.isfinite(T) else np.full(gen.size, k.branching_factor())
        n = rng.poisson(mass)
        parent = np.repeat(gen, n)
        u = rng.uniform(0.0, 1.0, parent.size) * np.repeat(mass, n)
        kids = parent + k.inverse_integral(u)
        kids = kids[kids <= T]
        out.append(kids)
        gen = kids
    return np.sort(np.concatenate(out)) if out else np.zeros(0)


def sample_cascade(k: Kernel, immigrant_time: float, T: float, rng: np.random.Generator) -> EventSequence:
    kids = sample_offspring(k, [immigrant_time], T, rng)
    times = np.concatenate([[immigrant_time], kids])
    labels = [IMMIGRANT] + [OFFSPRING] * kids.size
    horizon = T if np.isfinite(T) else max(float(times.max()), immigrant_time)
    return EventSequence(times, labels, horizon)


def sample_hawkes(k: Kernel, s: Exogenous, T: float, rng: np.random.Generator) -> EventSequence:
    """Labeled realisation on (0, T] via the cluster construction."""
    imm = sample_immigrants(s, T, rng)
    parents = imm
    if isinstance(s, Augmented) and s.gamma > 0:
        # the initial burst sits at t = 0: it seeds offspring but is not itself in (0, T]
        burst = np.zeros(rng.poisson(s.gamma))
        parents = np.concatenate([burst, imm])
    kids = sample_offspring(k, parents, T, rng)
    kids = kids[kids > 0]
    times = np.concatenate([imm, kids])
    labels = np.array([IMMIGRANT] * imm.size + [OFFSPRING] * kids.size)
    return EventSequence(times, labels, T)


def sample_hawkes_ogata(k: Kernel, s: Exogenous, T: float, rng: np.random.Generator) -> np.ndarray:
    """Unlabeled realisation by Ogata thinning; a cross-check for the cluster sampler.

    Needs a kernel that is nonincreasing on (0, inf), which both families are.
    """
    if s.atoms()[0].size:
        raise ValueError("Ogata sampler handles atom-free exogenous intensities only")
    s_bar = s.sup(T)
    events: list[float] = []
    t = 0.0
    while True:
        hist = np.asarray(events)
        # excitation decays between events, so its value just after t bounds the future
        right_limit = np.maximum(t - hist, np.finfo(float).tiny)
        bound = s_bar + (float(k(right_limit).sum()) if hist.size else 0.0)
        if bound <= 0:
            break
        t += rng.exponential(1.0 / bound)
        if t > T:
            break
        lam = float(s.eval(t)) + (float(k(t - hist).sum()) if hist.size else 0.0)
        if rng.uniform() * bound <= lam:
            events.append(t)
    return np.asarray(events)


def simulate_batch(k: Kernel, s: Exogenous, T: float, n: int, seed: int) -> list[EventSequence]:
    return [sample_hawkes(k, s, T, make_rng(ss)) for ss in spawn_seeds(seed, n)]


def censor(e: EventSequence, boundaries, label: str | None = None) -> CensoredSeries:
    b = np.asarray(boundaries, dtype=float)
    times = e.select(label)
    if times.size and (times.min() <= b[0] or times.max() > b[-1]):
        raise ValueError(f"events outside ({b[0]}, {b[-1]}]")
    idx = np.searchsorted(b, times, side="left")
    counts = np.bincount(idx - 1, minlength=b.size - 1) if times.size else np.zeros(b.size - 1)
    return CensoredSeries(b, counts)


@dataclass(eq=False)
class ScenarioData:
    """What a fitter may see for one sequence under a given observation regime.

    ``exogenous`` is the function the MBPP is built on: the known s(t) for A/D,
    the multi-impulse of immigrant times for B/E, the LHPP of immigrant
    counts for C/F.
    """

    scenario: str
    T: float
    exogenous: Exogenous
    events: np.ndarray | None = None          # event times the point-process loss sees
    all_events: np.ndarray | None = None      # every event time (A, B only)
    immigrants: np.ndarray | None = None      # immigrant times (B, E)
    counts: CensoredSeries | None = None      # offspring counts (E, F) or all counts (D)
    total_counts: CensoredSeries | None = None  # all-event counts (D, E, F)
    immigrant_counts: CensoredSeries | None = None  # (C, F)
    meta: dict = field(default_factory=dict)

    @property
    def separable(self) -> bool:
        return self.scenario in SEPARABLE


def make_scenario(e: EventSequence, scenario: str, O=None, Q=None,
                  exogenous: Exogenous | None = None) -> ScenarioData:
    scenario = scenario.upper()
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of A-F, got {scenario!r}")
    if scenario in SEPARABLE and not e.labeled and len(e):
        raise ValueError(f"scenario {scenario} needs immigrant/offspring labels")
    if scenario in "AD" and exogenous is None:
        raise ValueError(f"scenario {scenario} fits against a known exogenous function")
    T = e.T
    O = np.asarray(O if O is not None else [0.0, T], dtype=float)
    Q = np.asarray(Q, dtype=float) if Q is not None else O
    imm = e.select(IMMIGRANT) if e.labeled else np.zeros(0)
    off = e.select(OFFSPRING) if e.labeled else np.zeros(0)
    if scenario == "A":
        return ScenarioData("A", T, exogenous, events=e.times.copy(), all_events=e.times.copy())
    if scenario == "D":
        c = censor(e.unlabel(), O)
        return ScenarioData("D", T, exogenous, counts=c, total_counts=c)
    if scenario in "BE":
        s = MultiImpulse(imm)
        if scenario == "B":
            return ScenarioData("B", T, s, events=off, all_events=e.times.copy(), immigrants=imm)
        return ScenarioData("E", T, s, immigrants=imm, counts=censor(e, O, OFFSPRING),
                            total_counts=censor(e, O, None))
    ic = censor(e, Q, IMMIGRANT)
    s = lhpp_from_counts(ic.boundaries, ic.counts)
    if scenario == "C":
        return ScenarioData("C", T, s, events=off, immigrant_counts=ic)
    return ScenarioData("F", T, s, counts=censor(e, O, OFFSPRING),
                        total_counts=censor(e, O, None), immigrant_counts=ic)


def write_events(path, e: EventSequence):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "label"])
        for t, lab in zip(e.times, e.labels):
            w.writerow([repr(float(t)), lab])


def read_events(path, T: float | None = None) -> EventSequence:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "time" not in rows[0]:
        raise ValueError(f"{path}: expected columns time,label")
    times = np.array([float(r["time"]) for r in rows])
    labels = [r.get("label") or UNLABELED for r in rows]
    horizon = T if T is not None else (float(times.max()) if times.size else 0.0)
    return EventSequence(times, labels, horizon)


def write_censored(path, c: CensoredSeries):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start", "end", "count"])
        for a, b, n in zip(c.boundaries[:-1], c.boundaries[1:], c.counts):
            w.writerow([repr(float(a)), repr(float(b)), int(n) if float(n).is_integer() else n])


def read_censored(path) -> CensoredSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"start", "end", "count"} <= set(rows[0]):
        raise ValueError(f"{path}: expected columns start,end,count")
    starts = [float(r["start"]) for r in rows]
    ends = [float(r["end"]) for r in rows]
    if starts[1:] != ends[:-1]:
        raise ValueError(f"{path}: intervals must be contiguous")
    return CensoredSeries([starts[0]] + ends, [float(r["count"]) for r in rows])


def write_sidecar(path, config: dict, seed, **extra):
    from . import __version__
    payload = {"config": config, "seed": seed, "version": __version__, **extra}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    try:
        return exogenous_to_dict(obj)
    except TypeError:
        raise TypeError(f"cannot serialise {type(obj).__name__}") from None
