"""End-to-end experiments: prepare a state set, transform it, test contextuality at each checkpoint."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .contextuality import (
    EPS_MODEL,
    EPS_RANK,
    ContextualityVerdict,
    dual_frame,
    model_from_frame,
    rank_test,
    verify_model,
)
from .errors import ConfigError, DuplicateTheta, NotPure, ValidationError
from .maps.counterexample import DEFAULT_PRECISION_BITS, counterexample_map
from .maps.deutsch import deutsch_clone_set
from .maps.schrodinger_newton import SNConfig, SNPhaseResult, sn_channel, sn_moment_evolution
from .maps.weinberg import WeinbergHamiltonian, weinberg_evolve, weinberg_omega
from .qstate import (
    BlochState,
    StateSet,
    as_rng,
    density_to_bloch,
    random_pvm,
    state_from_json,
    state_to_json,
)

DELTA_RES = 1e-3
CSV_CONVENTION = "# x=sin(2*theta)*cos(phi), y=-sin(2*theta)*sin(phi), z=cos(2*theta); state cos(theta)|0>+sin(theta)e^(i*phi)|1>"


class MapKind(str, enum.Enum):
    DEUTSCH = "DEUTSCH"
    WEINBERG = "WEINBERG"
    SN = "SN"
    COUNTEREXAMPLE = "COUNTEREXAMPLE"
    IDENTITY = "IDENTITY"


TIMED = (MapKind.WEINBERG, MapKind.SN)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    map_kind: MapKind
    initial_states: StateSet
    weinberg: WeinbergHamiltonian | None = None
    sn: SNConfig | None = None
    precision_bits: int = DEFAULT_PRECISION_BITS
    time_schedule: tuple[float, ...] = ()
    pvm_samples: int = 50
    seed: int = 0
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "map_kind", MapKind(self.map_kind))
        sched = tuple(float(t) for t in self.time_schedule)
        object.__setattr__(self, "time_schedule", sched)
        if self.pvm_samples < 1:
            raise ConfigError("field 'pvm_samples' must be at least 1")
        if self.map_kind in TIMED:
            if not sched:
                raise ConfigError("field 'time_schedule' must be nonempty for time-evolving maps")
            if any(b < a for a, b in zip(sched, sched[1:])) or sched[0] < 0:
                raise ConfigError("field 'time_schedule' must be non-negative and non-decreasing")
        if self.map_kind is MapKind.WEINBERG and self.weinberg is None:
            raise ConfigError("field 'weinberg' is required for map_kind WEINBERG")
        if self.map_kind is MapKind.SN and self.sn is None:
            raise ConfigError("field 'sn' is required for map_kind SN")
        if self.map_kind in (MapKind.WEINBERG, MapKind.SN, MapKind.COUNTEREXAMPLE):
            if self.initial_states.dim != 2:
                raise ConfigError(f"map_kind {self.map_kind.value} acts on qubits only")
            if not self.initial_states.all_pure():
                raise ConfigError(f"map_kind {self.map_kind.value} needs pure initial states")
        if self.map_kind is MapKind.COUNTEREXAMPLE and not 8 <= self.precision_bits <= 32:
            raise ConfigError("field 'precision_bits' must lie in [8, 32]")

    @classmethod
    def from_json(cls, obj) -> "ScenarioConfig":
        if not isinstance(obj, dict):
            raise ConfigError("scenario config must be a JSON object")
        known = {"name", "map_kind", "initial_states", "weinberg", "sn", "precision_bits",
                 "time_schedule", "pvm_samples", "seed"}
        extra = sorted(set(obj) - known)
        if extra:
            raise ConfigError(f"unknown field '{extra[0]}'")
        for req in ("name", "map_kind", "initial_states"):
            if req not in obj:
                raise ConfigError(f"field '{req}' is required")
        if not isinstance(obj["name"], str):
            raise ConfigError("field 'name' must be a string")
        try:
            kind = MapKind(obj["map_kind"])
        except ValueError:
            raise ConfigError(
                f"field 'map_kind' must be one of {[k.value for k in MapKind]}, got {obj['map_kind']!r}"
            ) from None
        entries = obj["initial_states"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("field 'initial_states' must be a nonempty array")
        states, labels = [], []
        try:
            for i, e in enumerate(entries):
                rho, label = state_from_json(e)
                states.append(rho)
                labels.append(label if label is not None else f"s{i}")
            initial = StateSet(tuple(states), tuple(labels))
        except ValidationError as exc:
            raise ConfigError(f"field 'initial_states': {exc}") from None
        weinberg = sn = None
        try:
            if obj.get("weinberg") is not None:
                weinberg = WeinbergHamiltonian.from_json(obj["weinberg"])
        except ValidationError as exc:
            raise ConfigError(f"field 'weinberg': {exc}") from None
        try:
            if obj.get("sn") is not None:
                sn = SNConfig.from_json(obj["sn"])
        except ValidationError as exc:
            raise ConfigError(f"field 'sn': {exc}") from None
        ints = {}
        for name, default in (("precision_bits", DEFAULT_PRECISION_BITS), ("pvm_samples", 50), ("seed", 0)):
            val = obj.get(name, default)
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"field '{name}' must be an integer")
            ints[name] = val
        sched = obj.get("time_schedule", [])
        if not isinstance(sched, list) or not all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in sched
        ):
            raise ConfigError("field 'time_schedule' must be an array of numbers")
        return cls(
            name=obj["name"], map_kind=kind, initial_states=initial, weinberg=weinberg, sn=sn,
            time_schedule=tuple(sched), source=obj, **ints,
        )

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "map_kind": self.map_kind.value,
            "initial_states": [state_to_json(s, lab) for s, lab in
                               zip(self.initial_states.states, self.initial_states.labels)],
            "time_schedule": list(self.time_schedule),
            "pvm_samples": self.pvm_samples,
            "seed": self.seed,
        }
        if self.map_kind is MapKind.COUNTEREXAMPLE:
            out["precision_bits"] = self.precision_bits
        if self.weinberg is not None:
            out["weinberg"] = self.weinberg.to_json()
        if self.sn is not None:
            out["sn"] = self.source.get("sn") if self.source.get("sn") is not None else self.sn.to_json()
        return out


@dataclass
class Checkpoint:
    label: str
    time: float | None
    verdict: ContextualityVerdict
    bloch: list[dict] | None
    model: dict | None = None
    model_skipped: str | None = None
    max_model_deviation: float | None = None
    model_passed: bool | None = None
    resonance_ok: bool | None = None

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "time": self.time,
            "verdict": self.verdict.to_json(),
            "model": self.model,
            "model_skipped": self.model_skipped,
            "max_model_deviation": self.max_model_deviation,
            "model_passed": self.model_passed,
            "resonance_ok": self.resonance_ok,
            "bloch": self.bloch,
        }


@dataclass
class ScenarioReport:
    config: ScenarioConfig
    checkpoints: list[Checkpoint]

    @property
    def transition(self) -> bool:
        return detect_transition([c.verdict for c in self.checkpoints])

    def to_json(self) -> dict:
        return {
            "tool_version": __version__,
            "name": self.config.name,
            "map_kind": self.config.map_kind.value,
            "transition": self.transition,
            "checkpoints": [c.to_json() for c in self.checkpoints],
            "config": self.config.to_json(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n"

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_CONVENTION + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "label", "x", "y", "z"])
        for c in self.checkpoints:
            if c.bloch is None:
                continue
            t = c.label if c.time is None else repr(c.time)
            for b in c.bloch:
                w.writerow([t, b["label"], repr(b["x"]), repr(b["y"]), repr(b["z"])])
        return buf.getvalue()


def detect_transition(verdicts: Sequence[ContextualityVerdict]) -> bool:
    """True iff a dependent checkpoint is followed (not necessarily directly) by an independent one."""
    seen_dependent = False
    for v in verdicts:
        if v.dependent:
            seen_dependent = True
        elif seen_dependent:
            return True
    return False


def build_meridian_set(thetas: Sequence[float], phi: float = 0.0) -> StateSet:
    """Pure qubit states at the given polar angles, all on the meridian ``phi``."""
    if len(thetas) < 1:
        raise ValidationError("a meridian set needs at least one angle")
    if len(set(float(t) for t in thetas)) != len(thetas):
        raise DuplicateTheta("meridian angles must be distinct")
    states = [BlochState(t, phi) for t in thetas]
    labels = [f"theta={t:.6g}" for t in thetas]
    return StateSet.from_bloch(states, labels)


def resonance_guard(
    h: WeinbergHamiltonian, thetas: Sequence[float], t: float, delta_res: float = DELTA_RES
) -> bool:
    """True iff every pair of non-pole states has drifted apart in phi by more than ``delta_res``.

    Two meridian states become coplanar with the poles again whenever their
    azimuths differ by a multiple of pi, so the drift is measured modulo pi.
    """
    inner = [th for th in thetas if 0.0 < th < math.pi / 2]
    omegas = [weinberg_omega(h, th) for th in inner]
    for i in range(len(omegas)):
        for j in range(i + 1, len(omegas)):
            drift = math.fmod(abs((omegas[i] - omegas[j]) * t), math.pi)
            if min(drift, math.pi - drift) <= delta_res:
                return False
    return True


def _bloch_rows(states: Sequence[BlochState], labels: Sequence[str]) -> list[dict]:
    rows = []
    for s, lab in zip(states, labels):
        x, y, z = (c + 0.0 for c in s.bloch_vector())  # drop signed zeros
        rows.append({"label": lab, "theta": s.theta, "phi": s.phi, "x": x, "y": y, "z": z})
    return rows


def _as_bloch(states: StateSet) -> list[BlochState] | None:
    if states.dim != 2:
        return None
    try:
        return [density_to_bloch(s) for s in states]
    except NotPure:
        return None


class _Runner:
    def __init__(self, cfg: ScenarioConfig, eps_rank: float, eps_model: float):
        self.cfg = cfg
        self.eps_rank = eps_rank
        self.eps_model = eps_model
        self.rng = as_rng(cfg.seed)

    def checkpoint(self, label: str, time: float | None, states: StateSet,
                   bloch: list[BlochState] | None) -> Checkpoint:
        verdict = rank_test(states, self.eps_rank)
        rows = _bloch_rows(bloch, states.labels) if bloch is not None else None
        cp = Checkpoint(label=label, time=time, verdict=verdict, bloch=rows)
        if verdict.dependent:
            cp.model_skipped = "dependent set: no dual frame exists"
        elif verdict.warnings:
            cp.model_skipped = "mixed state present: dual-frame model not constructed"
        else:
            model = model_from_frame(states, dual_frame(states, self.eps_rank))
            pvms = [random_pvm(states.dim, int(self.rng.integers(1, states.dim + 1)), self.rng)
                    for _ in range(self.cfg.pvm_samples)]
            check = verify_model(states, model, pvms, self.eps_model)
            cp.model = model.summary()
            cp.max_model_deviation = check.max_deviation
            cp.model_passed = check.passed
        return cp


def run_scenario(cfg: ScenarioConfig, eps_rank: float = EPS_RANK, eps_model: float = EPS_MODEL) -> ScenarioReport:
    """Apply the configured map at every checkpoint and test each resulting set."""
    run = _Runner(cfg, eps_rank, eps_model)
    initial = cfg.initial_states
    labels = initial.labels
    kind = cfg.map_kind
    cps: list[Checkpoint] = []

    if kind in (MapKind.DEUTSCH, MapKind.COUNTEREXAMPLE) or (kind is MapKind.IDENTITY and not cfg.time_schedule):
        cps.append(run.checkpoint("pre", None, initial, _as_bloch(initial)))
        if kind is MapKind.DEUTSCH:
            post = deutsch_clone_set(initial)
            cps.append(run.checkpoint("post", None, post, None))
        elif kind is MapKind.COUNTEREXAMPLE:
            images = [counterexample_map(b, cfg.precision_bits) for b in _as_bloch(initial)]
            cps.append(run.checkpoint("post", None, StateSet.from_bloch(images, labels), images))
        else:
            cps.append(run.checkpoint("post", None, initial, _as_bloch(initial)))
        return ScenarioReport(cfg, cps)

    if kind is MapKind.IDENTITY:
        for t in cfg.time_schedule:
            cps.append(run.checkpoint(f"t={t:g}", t, initial, _as_bloch(initial)))
        return ScenarioReport(cfg, cps)

    bloch0 = _as_bloch(initial)
    if kind is MapKind.WEINBERG:
        thetas = [b.theta for b in bloch0]
        for t in cfg.time_schedule:
            evolved = [weinberg_evolve(b, cfg.weinberg, t) for b in bloch0]
            cp = run.checkpoint(f"t={t:g}", t, StateSet.from_bloch(evolved, labels), evolved)
            cp.resonance_ok = resonance_guard(cfg.weinberg, thetas, t)
            cps.append(cp)
        return ScenarioReport(cfg, cps)

    # SN: one moment integration per distinct polar angle, read off at each checkpoint
    results: dict[float, SNPhaseResult] = {}
    for b in bloch0:
        if not b.is_pole and b.theta not in results:
            results[b.theta] = sn_moment_evolution(cfg.sn, math.cos(b.theta) ** 2)
    t0 = cfg.sn.times[0]
    for t in cfg.time_schedule:
        at = t0 + t
        evolved = [sn_channel(b, cfg.sn, at_time=at, result=results.get(b.theta)) for b in bloch0]
        cps.append(run.checkpoint(f"t={t:g}", t, StateSet.from_bloch(evolved, labels), evolved))
    return ScenarioReport(cfg, cps)


def load_scenario(path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return ScenarioConfig.from_json(obj)


def bundled_scenarios() -> dict[str, Path]:
    """Example configurations shipped with the package, keyed by file stem."""
    root = Path(__file__).parent / "data" / "scenarios"
    return {p.stem: p for p in sorted(root.glob("*.json"))}
