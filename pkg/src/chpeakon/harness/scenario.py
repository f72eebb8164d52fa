"""Scenario files, verdict rows and output records."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from ..approx import CORPUS, get_datum, multipeakon_approx
from ..dynamics import SolverConfig
from ..kernel import PeakonState

SCHEMA = 1


class ScenarioError(ValueError):
    pass


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class InitialData:
    """Either an explicit peakon list or a corpus datum sampled with N peakons."""

    p: tuple = ()
    q: tuple = ()
    datum: Optional[str] = None
    n: Optional[int] = None

    @classmethod
    def from_dict(cls, d: dict) -> "InitialData":
        if "datum" in d:
            if d["datum"] not in CORPUS:
                raise ScenarioError(f"unknown datum {d['datum']!r}; known: {sorted(CORPUS)}")
            n = int(d.get("N", 16))
            if n < 1:
                raise ScenarioError("N must be at least 1")
            return cls(datum=d["datum"], n=n)
        p, q = tuple(map(float, d.get("p", ()))), tuple(map(float, d.get("q", ())))
        if len(p) != len(q):
            raise ScenarioError("p and q must have equal length")
        return cls(p=p, q=q)

    def to_dict(self) -> dict:
        if self.datum is not None:
            return {"datum": self.datum, "N": self.n}
        return {"p": list(self.p), "q": list(self.q)}

    def state(self) -> PeakonState:
        if self.datum is not None:
            return multipeakon_approx(get_datum(self.datum), self.n)
        return PeakonState(np.array(self.p), np.array(self.q))


@dataclass(frozen=True)
class MetricOptions:
    budget: int = 1
    knots: int = 8
    grid: int = 64
    kappa_max: Optional[float] = None


@dataclass(frozen=True)
class Scenario:
    name: str
    initial: InitialData = field(default_factory=InitialData)
    partner: Optional[InitialData] = None
    t_final: float = 1.0
    samples: int = 11
    solver: SolverConfig = field(default_factory=SolverConfig)
    metric: MetricOptions = field(default_factory=MetricOptions)
    datum: Optional[str] = None
    n_list: tuple = (8, 16, 32, 64)
    suite: Optional[str] = None
    seed: int = 0
    size: Optional[int] = None
    out: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if d.get("schema") != SCHEMA:
            raise ScenarioError(f"scenario schema must be {SCHEMA}, got {d.get('schema')!r}")
        t_final = float(d.get("t_final", 1.0))
        if not math.isfinite(t_final):
            raise ScenarioError("t_final must be finite")
        known = {f.name for f in fields(SolverConfig)}
        extra = set(d.get("solver", {})) - known
        if extra:
            raise ScenarioError(f"unknown solver settings: {sorted(extra)}")
        approx = d.get("approx", {})
        datum = approx.get("datum")
        if datum is not None and datum not in CORPUS:
            raise ScenarioError(f"unknown datum {datum!r}; known: {sorted(CORPUS)}")
        samples = int(d.get("samples", 11))
        if samples < 2:
            raise ScenarioError("need at least two samples")
        return cls(
            name=str(d.get("name", "scenario")),
            initial=InitialData.from_dict(d.get("initial", {})),
            partner=InitialData.from_dict(d["partner"]) if "partner" in d else None,
            t_final=t_final,
            samples=samples,
            solver=SolverConfig(**d.get("solver", {})),
            metric=MetricOptions(**d.get("metric", {})),
            datum=datum,
            n_list=tuple(int(n) for n in approx.get("N", (8, 16, 32, 64))),
            suite=d.get("suite"),
            seed=int(d.get("seed", 0)),
            size=d.get("size"),
            out=d.get("out"),
        )

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA, "name": self.name, "initial": self.initial.to_dict(),
             "t_final": self.t_final, "samples": self.samples,
             "solver": asdict(self.solver), "metric": asdict(self.metric),
             "seed": self.seed}
        if self.partner is not None:
            d["partner"] = self.partner.to_dict()
        if self.datum is not None:
            d["approx"] = {"datum": self.datum, "N": list(self.n_list)}
        if self.suite is not None:
            d["suite"] = self.suite
        if self.size is not None:
            d["size"] = self.size
        return d

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.samples)


@dataclass(frozen=True)
class Verdict:
    """One checked inequality ``measured <= bound``; slack is ``bound - measured``."""

    suite: str
    inequality: str
    constant: float
    measured: float
    bound: float
    detail: str = ""

    @property
    def slack(self) -> float:
        return self.bound - self.measured

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.measured) and self.measured <= self.bound)

    def to_dict(self) -> dict:
        return {"suite": self.suite, "inequality": self.inequality,
                "constant": _finite(self.constant), "measured": _finite(self.measured),
                "bound": _finite(self.bound), "slack": _finite(self.slack), "passed": self.passed,
                "detail": self.detail}

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.suite}: {self.inequality}  measured={self.measured:.3e}"
                f" bound={self.bound:.3e} slack={self.slack:.3e}")


TRAJECTORY_HEADER = ["t", "n", "energy", "hamiltonian", "momentum"]
PEAKON_HEADER = ["t", "k", "p", "q"]
EVENT_HEADER = ["tau", "qbar", "atom"]
METRIC_HEADER = ["t", "lower", "upper", "plan"]
APPROX_HEADER = ["datum", "N", "error", "mass"]


@dataclass
class OutputRecord:
    scenario: dict
    trajectory: Optional[list] = None
    peakons: Optional[list] = None
    events: Optional[list] = None
    metric: Optional[list] = None
    approx: Optional[list] = None
    verdicts: list = field(default_factory=list)
    # None marks a table the command does not produce; [] is written header-only

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def write(self, out_dir) -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        tables = [("trajectory.csv", TRAJECTORY_HEADER, self.trajectory),
                  ("peakons.csv", PEAKON_HEADER, self.peakons),
                  ("events.csv", EVENT_HEADER, self.events),
                  ("metric.csv", METRIC_HEADER, self.metric),
                  ("approx.csv", APPROX_HEADER, self.approx)]
        for name, header, rows in tables:
            if rows is None:
                continue
            with open(out / name, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                for row in rows:
                    w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
            written.append(out / name)
        verdicts = {"passed": self.passed, "verdicts": [v.to_dict() for v in self.verdicts]}
        for name, payload in (("verdicts.json", verdicts),
                              ("scenario.json", self.scenario)):
            with open(out / name, "w") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
                fh.write("\n")
            written.append(out / name)
        return written


def _finite(x):
    """Strict JSON has no NaN or infinity; those become null."""
    return float(x) if math.isfinite(x) else None


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o).__name__}")
