"""Problem data: instances, vehicle configurations and demand scenarios.

Node and hub indices are 0-based throughout. ``hub_candidates`` holds node
indices; everything indexed "per hub" (fixed costs, capacities, x rows,
y rows/columns) follows the order of ``hub_candidates``.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import math
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class InstanceError(ValueError):
    """Raised when an instance or scenario file cannot be parsed or validated."""


class NetworkMode(str, enum.Enum):
    COMPLETE = "complete"
    GENERAL = "general"


class CapacityMode(str, enum.Enum):
    TIGHT = "tight"
    LOOSE = "loose"
    UNCAPACITATED = "uncap"

    @property
    def letter(self) -> str:
        return {"tight": "T", "loose": "L", "uncap": "U"}[self.value]


@dataclasses.dataclass(frozen=True)
class VehicleConfig:
    """Uniform primary (Q, B, G) and secondary (q, b, g) vehicle parameters."""

    Q: float
    q: float
    B: float
    b: float
    G: float = 0.0
    g: float = 0.0
    label: str = "custom"

    def __post_init__(self):
        if not (self.Q > self.q > 0):
            raise InstanceError(f"vehicle capacities must satisfy Q > q > 0 (Q={self.Q}, q={self.q})")
        for name in ("B", "b", "G", "g"):
            if getattr(self, name) < 0:
                raise InstanceError(f"vehicle cost {name} must be nonnegative")
        if self.B / self.Q >= self.b / self.q:
            warnings.warn(
                f"vehicle config {self.label}: B/Q={self.B / self.Q:.4g} >= b/q={self.b / self.q:.4g}, "
                "inter-hub transport has no economies of scale",
                stacklevel=2,
            )

    @property
    def cost_ratio(self) -> float:
        """(B/Q)/(b/q): the best per-unit discount a full primary vehicle achieves."""
        return (self.B / self.Q) / (self.b / self.q)

    def to_dict(self) -> dict:
        return {"Q": self.Q, "q": self.q, "B": self.B, "b": self.b, "G": self.G, "g": self.g}

    @classmethod
    def from_dict(cls, d: dict, label: str = "custom") -> "VehicleConfig":
        try:
            return cls(
                Q=float(d["Q"]), q=float(d["q"]), B=float(d["B"]), b=float(d["b"]),
                G=float(d.get("G", 0.0)), g=float(d.get("g", 0.0)), label=d.get("label", label),
            )
        except KeyError as exc:
            raise InstanceError(f"vehicle config missing field {exc.args[0]!r}") from None


# Fixed utilization costs are zero in all four configurations.
VEHICLE_CONFIGS: dict[str, VehicleConfig] = {
    "L1": VehicleConfig(Q=600, q=100, B=600, b=260, label="L1"),
    "L2": VehicleConfig(Q=600, q=150, B=600, b=300, label="L2"),
    "L3": VehicleConfig(Q=320, q=100, B=500, b=260, label="L3"),
    "L4": VehicleConfig(Q=320, q=150, B=500, b=300, label="L4"),
}


def parse_vehicle(spec: str) -> VehicleConfig:
    """Parse ``L1``..``L4`` or ``custom Q,q,B,b,G,g`` / ``Q,q,B,b,G,g``."""
    spec = spec.strip()
    if spec.upper() in VEHICLE_CONFIGS:
        return VEHICLE_CONFIGS[spec.upper()]
    body = spec[len("custom"):].strip(" :=") if spec.lower().startswith("custom") else spec
    parts = [p for p in body.replace(" ", ",").split(",") if p]
    if len(parts) != 6:
        raise InstanceError("custom vehicle config needs all six values Q,q,B,b,G,g")
    try:
        Q, q, B, b, G, g = (float(p) for p in parts)
    except ValueError:
        raise InstanceError(f"non-numeric custom vehicle config {spec!r}") from None
    return VehicleConfig(Q=Q, q=q, B=B, b=b, G=G, g=g, label="custom")


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def euclidean(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


@dataclasses.dataclass(frozen=True, eq=False)
class Instance:
    flow: np.ndarray
    distance: np.ndarray
    fixed_cost: np.ndarray
    capacity: np.ndarray  # +inf marks an uncapacitated hub
    vehicle: VehicleConfig
    hub_candidates: tuple[int, ...] = ()
    coords: Optional[np.ndarray] = None
    p_hubs: Optional[int] = None
    network: NetworkMode = NetworkMode.COMPLETE
    name: str = "instance"
    capacity_mode: Optional[CapacityMode] = None

    def __post_init__(self):
        n = len(self.flow)
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        if not self.hub_candidates:
            set_("hub_candidates", tuple(range(n)))
        set_("hub_candidates", tuple(int(h) for h in self.hub_candidates))
        set_("flow", _frozen(self.flow))
        set_("distance", _frozen(self.distance))
        set_("fixed_cost", _frozen(self.fixed_cost))
        set_("capacity", _frozen([math.inf if c is None else c for c in self.capacity]))
        if self.coords is not None:
            set_("coords", _frozen(self.coords))
        set_("network", NetworkMode(self.network))
        self.validate()

    # -- derived data -----------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.flow)

    @property
    def hubs(self) -> tuple[int, ...]:
        return self.hub_candidates

    @property
    def n_hubs(self) -> int:
        return len(self.hub_candidates)

    @property
    def origin(self) -> np.ndarray:
        return self.flow.sum(axis=1)

    @property
    def destination(self) -> np.ndarray:
        return self.flow.sum(axis=0)

    @property
    def capacitated(self) -> bool:
        return bool(np.isfinite(self.capacity).any())

    def hub_position(self, node: int) -> int:
        return self.hub_candidates.index(node)

    def validate(self) -> None:
        n = self.n
        if n < 1:
            raise InstanceError("instance needs at least one node")
        if self.flow.shape != (n, n):
            raise InstanceError(f"flow must be {n}x{n}, got {self.flow.shape}")
        if self.distance.shape != (n, n):
            raise InstanceError(f"distance must be {n}x{n}, got {self.distance.shape}")
        if not np.all(np.isfinite(self.flow)):
            raise InstanceError("flow must be finite")
        if np.any(self.flow < 0):
            i, j = np.argwhere(self.flow < 0)[0]
            raise InstanceError(f"flow must be nonnegative (w[{i}][{j}]={self.flow[i, j]})")
        if np.any(self.distance < 0) or not np.all(np.isfinite(self.distance)):
            raise InstanceError("distance must be finite and nonnegative")
        if not np.allclose(self.distance, self.distance.T, rtol=0, atol=1e-9):
            raise InstanceError("distance must be symmetric")
        if np.any(np.diag(self.distance) != 0):
            raise InstanceError("distance must have a zero diagonal")
        hubs = self.hub_candidates
        if len(set(hubs)) != len(hubs) or any(not 0 <= h < n for h in hubs):
            raise InstanceError("hub candidates must be distinct node indices")
        if len(hubs) == 0:
            raise InstanceError("at least one hub candidate is required")
        for name in ("fixed_cost", "capacity"):
            if getattr(self, name).shape != (len(hubs),):
                raise InstanceError(f"{name} needs one entry per hub candidate ({len(hubs)})")
        if np.any(self.fixed_cost < 0):
            raise InstanceError("fixed cost must be nonnegative")
        if np.any(self.capacity <= 0):
            raise InstanceError("hub capacity must be positive or unbounded")
        if self.p_hubs is not None and not 1 <= self.p_hubs <= len(hubs):
            raise InstanceError(f"p_hubs must lie in [1, {len(hubs)}], got {self.p_hubs}")
        if self.coords is not None and self.coords.shape != (n, 2):
            raise InstanceError(f"coords must be {n}x2")

    def replace(self, **changes) -> "Instance":
        return dataclasses.replace(self, **changes)

    def with_flow(self, flow) -> "Instance":
        return self.replace(flow=np.asarray(flow, dtype=float))

    @property
    def label(self) -> str:
        """``#nodes#cap-#vehicle`` style name, e.g. ``20T-L1``."""
        cap = self.capacity_mode.letter if self.capacity_mode else ("U" if not self.capacitated else "C")
        return f"{self.n}{cap}-{self.vehicle.label}"

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        d: dict = {"name": self.name, "n": self.n}
        if self.coords is not None:
            d["coords"] = self.coords.tolist()
        else:
            d["distance"] = self.distance.tolist()
        d["flow"] = self.flow.tolist()
        if self.hub_candidates != tuple(range(self.n)):
            d["hub_candidates"] = list(self.hub_candidates)
        d["fixed_cost"] = self.fixed_cost.tolist()
        d["capacity"] = [None if math.isinf(c) else c for c in self.capacity.tolist()]
        d["vehicle"] = self.vehicle.to_dict()
        if self.vehicle.label != "custom":
            d["vehicle"]["label"] = self.vehicle.label
        if self.p_hubs is not None:
            d["p_hubs"] = self.p_hubs
        d["network"] = self.network.value
        if self.capacity_mode is not None:
            d["capacity_mode"] = self.capacity_mode.value
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())


def _matrix(d: dict, key: str, shape) -> np.ndarray:
    try:
        arr = np.array(d[key], dtype=float)
    except (ValueError, TypeError) as exc:
        raise InstanceError(f"field {key!r}: {exc}") from None
    if arr.shape != shape:
        raise InstanceError(f"field {key!r} must have shape {shape}, got {arr.shape}")
    return arr


def instance_from_dict(d: dict, capacity_mode: Optional[CapacityMode] = None) -> Instance:
    """Build an Instance from the canonical document.

    ``capacity`` is a per-hub list (``null`` entries are unbounded), ``null``
    for an uncapacitated instance, or an object with ``tight``/``loose``
    lists that ``capacity_mode`` chooses between.
    """
    if "n" not in d or "flow" not in d:
        raise InstanceError("instance needs fields 'n' and 'flow'")
    n = int(d["n"])
    if ("coords" in d) == ("distance" in d):
        raise InstanceError("exactly one of 'coords' / 'distance' is required")
    flow = _matrix(d, "flow", (n, n))
    coords = None
    if "coords" in d:
        coords = _matrix(d, "coords", (n, 2))
        distance = euclidean(coords)
    else:
        distance = _matrix(d, "distance", (n, n))
    hubs = tuple(d.get("hub_candidates") or range(n))
    if "fixed_cost" not in d:
        raise InstanceError("instance needs field 'fixed_cost'")
    fixed = np.array(d["fixed_cost"], dtype=float)

    raw_cap = d.get("capacity")
    mode = capacity_mode or (CapacityMode(d["capacity_mode"]) if d.get("capacity_mode") else None)
    if mode is CapacityMode.UNCAPACITATED or raw_cap is None:
        capacity = [math.inf] * len(hubs)
        if raw_cap is None and mode is None:
            mode = CapacityMode.UNCAPACITATED
    elif isinstance(raw_cap, dict):
        if mode is None or mode.value not in raw_cap:
            raise InstanceError(f"capacity levels {sorted(raw_cap)} need --capacity tight|loose|uncap")
        capacity = [math.inf if c is None else float(c) for c in raw_cap[mode.value]]
    else:
        capacity = [math.inf if c is None else float(c) for c in raw_cap]
    if "vehicle" not in d:
        raise InstanceError("instance needs field 'vehicle'")
    vehicle = parse_vehicle(d["vehicle"]) if isinstance(d["vehicle"], str) else VehicleConfig.from_dict(d["vehicle"])
    try:
        network = NetworkMode(d.get("network", "complete"))
    except ValueError:
        raise InstanceError(f"network must be 'complete' or 'general', got {d.get('network')!r}") from None
    p = d.get("p_hubs")
    return Instance(
        flow=flow, distance=distance, fixed_cost=fixed, capacity=np.array(capacity, dtype=float),
        vehicle=vehicle, hub_candidates=hubs, coords=coords,
        p_hubs=None if p is None else int(p), network=network,
        name=str(d.get("name", "instance")), capacity_mode=mode,
    )


def load_instance(path, capacity_mode: Optional[CapacityMode] = None) -> Instance:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(d, dict):
        raise InstanceError(f"{path}: top-level document must be an object")
    d.setdefault("name", Path(path).stem)
    return instance_from_dict(d, capacity_mode)


def import_ap(raw, capacity_mode: CapacityMode, vehicle: VehicleConfig, name: Optional[str] = None) -> Instance:
    """Read the plain-text AP layout.

    Layout (blank lines ignored)::

        n
        x y                      (n lines)
        w_i1 ... w_in            (n lines, row-major flows)
        F_h U^T_h U^L_h          (n lines: fixed cost, tight, loose capacity)

    Every node is a hub candidate. Fixed costs are always applied.
    """
    path = Path(raw)
    lines = [(k + 1, ln.split()) for k, ln in enumerate(path.read_text().splitlines()) if ln.strip()]
    if not lines:
        raise InstanceError(f"{path}: empty file")

    def num(lineno, tok):
        try:
            return float(tok)
        except ValueError:
            raise InstanceError(f"{path}:{lineno}: not a number: {tok!r}") from None

    lineno, head = lines[0]
    if len(head) != 1:
        raise InstanceError(f"{path}:{lineno}: header must hold only n")
    n = int(num(lineno, head[0]))
    if len(lines) != 1 + 3 * n:
        raise InstanceError(f"{path}: layout mismatch, expected {1 + 3 * n} data lines for n={n}, got {len(lines)}")
    body = lines[1:]

    def block(rows, width, what):
        out = []
        for lineno, toks in rows:
            if len(toks) != width:
                raise InstanceError(f"{path}:{lineno}: {what} line needs {width} values, got {len(toks)}")
            out.append([num(lineno, t) for t in toks])
        return np.array(out)

    coords = block(body[:n], 2, "coordinate")
    flow = block(body[n:2 * n], n, "flow")
    fac_rows = body[2 * n:]
    for lineno, toks in fac_rows:
        if len(toks) < 3:
            raise InstanceError(f"{path}:{lineno}: missing capacity column (need fixed cost, tight, loose)")
    fac = block(fac_rows, 3, "facility")
    if capacity_mode is CapacityMode.UNCAPACITATED:
        capacity = np.full(n, math.inf)
    elif capacity_mode is CapacityMode.TIGHT:
        capacity = fac[:, 1]
    else:
        capacity = fac[:, 2]
    return Instance(
        flow=flow, distance=euclidean(coords), fixed_cost=fac[:, 0], capacity=capacity,
        vehicle=vehicle, coords=coords, name=name or path.stem, capacity_mode=CapacityMode(capacity_mode),
    )


def write_ap(instance: Instance, path, tight: Sequence[float], loose: Sequence[float]) -> None:
    """Write ``instance`` in the AP text layout (coords required)."""
    if instance.coords is None:
        raise InstanceError("AP layout needs coordinates")
    n = instance.n
    rows = [str(n)]
    rows += [f"{x!r} {y!r}" for x, y in instance.coords.tolist()]
    rows += [" ".join(repr(v) for v in r) for r in instance.flow.tolist()]
    rows += [f"{f!r} {t!r} {lo!r}" for f, t, lo in zip(instance.fixed_cost.tolist(), map(float, tight), map(float, loose))]
    Path(path).write_text("\n".join(rows) + "\n")


@dataclasses.dataclass(frozen=True, eq=False)
class ScenarioSet:
    flows: tuple[np.ndarray, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        flows = tuple(_frozen(f) for f in self.flows)
        object.__setattr__(self, "flows", flows)
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        if not flows:
            raise InstanceError("scenario set needs at least one scenario")
        if len(flows) != len(self.probabilities):
            raise InstanceError("one probability per scenario required")
        n = flows[0].shape[0]
        for f in flows:
            if f.shape != (n, n):
                raise InstanceError("all scenario flow matrices must be NxN")
            if np.any(f < 0) or not np.all(np.isfinite(f)):
                raise InstanceError("scenario flows must be finite and nonnegative")
        if any(p < 0 for p in self.probabilities) or abs(math.fsum(self.probabilities) - 1.0) > 1e-12:
            raise InstanceError("scenario probabilities must be nonnegative and sum to 1")

    @property
    def m(self) -> int:
        return len(self.flows)

    def to_dict(self) -> dict:
        return {"m": self.m, "probabilities": list(self.probabilities), "flows": [f.tolist() for f in self.flows]}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def uniform(cls, flows) -> "ScenarioSet":
        m = len(flows)
        return cls(tuple(flows), tuple([1.0 / m] * m))


def load_scenarios(path, n: Optional[int] = None) -> ScenarioSet:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if "flows" not in d:
        raise InstanceError(f"{path}: scenario file needs 'flows'")
    flows = [np.array(f, dtype=float) for f in d["flows"]]
    if "m" in d and int(d["m"]) != len(flows):
        raise InstanceError(f"{path}: m={d['m']} but {len(flows)} flow matrices")
    if n is not None and any(f.shape != (n, n) for f in flows):
        raise InstanceError(f"{path}: scenario flows must be {n}x{n}")
    probs = d.get("probabilities") or [1.0 / len(flows)] * len(flows)
    return ScenarioSet(tuple(flows), tuple(probs))


def generate_scenarios(instance: Instance, m: int, seed: int, pi_range=(0.5, 1.5)) -> ScenarioSet:
    """Poisson demand scenarios around the instance flows.

    Each scenario draws one deviation ``pi_i ~ U[pi_range]`` per node and
    then ``w^s_ij ~ Poisson(pi_i * pi_j * w_ij)``; scenarios are equiprobable.
    """
    if m < 1:
        raise ValueError("need at least one scenario")
    rng = np.random.default_rng(seed)
    lo, hi = pi_range
    flows = []
    for _ in range(m):
        pi = rng.uniform(lo, hi, size=instance.n)
        flows.append(rng.poisson(np.outer(pi, pi) * instance.flow).astype(float))
    return ScenarioSet.uniform(flows)


def random_instance(
    n: int,
    rng: np.random.Generator,
    capacity_mode: CapacityMode = CapacityMode.UNCAPACITATED,
    vehicle: VehicleConfig | str = "L1",
    *,
    side: float = 10.0,
    max_flow: int = 200,
    fixed_range=(5_000.0, 40_000.0),
    density: float = 0.8,
    p_hubs: Optional[int] = None,
    network: NetworkMode = NetworkMode.COMPLETE,
    name: Optional[str] = None,
) -> Instance:
    """Synthetic AP-like instance: uniform coordinates, sparse integer flows.

    Tight capacities are drawn from [0.35, 0.6] of total origin demand and
    loose ones from [0.6, 1.0]; neither is guaranteed to admit a feasible
    assignment.
    """
    if isinstance(vehicle, str):
        vehicle = VEHICLE_CONFIGS[vehicle]
    coords = rng.uniform(0.0, side, size=(n, 2))
    flow = rng.integers(0, max_flow + 1, size=(n, n)).astype(float)
    flow *= rng.random((n, n)) < density
    np.fill_diagonal(flow, 0.0)
    fixed = rng.uniform(*fixed_range, size=n).round()
    total = flow.sum()
    if capacity_mode is CapacityMode.TIGHT:
        capacity = (total * rng.uniform(0.35, 0.6, size=n)).round()
    elif capacity_mode is CapacityMode.LOOSE:
        capacity = (total * rng.uniform(0.6, 1.0, size=n)).round()
    else:
        capacity = np.full(n, math.inf)
    capacity = np.maximum(capacity, 1.0)
    return Instance(
        flow=flow, distance=euclidean(coords), fixed_cost=fixed, capacity=capacity, vehicle=vehicle,
        coords=coords, p_hubs=p_hubs, network=network, capacity_mode=capacity_mode,
        name=name or f"rand{n}{capacity_mode.letter}-{vehicle.label}",
    )
