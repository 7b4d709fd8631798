"""Named example paths, the seeded random battery, and the JSON path format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InputError
from .flow import patch_path
from .grassmann import Subspace
from .propagator import OperatorPath

WINDOW = (-40.0, 40.0)
PRESETS = ("tanh-diag", "scalar-tanh", "rotation", "patch", "random-battery")
FAMILIES = ("diagonal", "rotated", "patched", "perturbed")


def tanh_diag():
    return OperatorPath.from_function(lambda t: np.diag([np.tanh(t), -np.tanh(t)]), WINDOW,
                                      np.diag([-1.0, 1.0]), np.diag([1.0, -1.0]), name="tanh-diag")


def scalar_tanh(reversed=False):
    s = -1.0 if reversed else 1.0
    return OperatorPath.from_function(lambda t: np.array([[s * np.tanh(t)]]), WINDOW,
                                      [[-s]], [[s]], name="scalar-tanh")


def rotation(angle=1.0):
    """Rotation generator plus a decaying bump: both limits have spectrum ``±i angle``."""
    J = np.array([[0.0, -angle], [angle, 0.0]])
    return OperatorPath.from_function(lambda t: J + np.eye(2) / np.cosh(t), WINDOW, J, J, name="rotation")


def _sigmoid_entries(lo, hi, slope, shift):
    mid = 0.5 * (hi + lo)
    amp = 0.5 * (hi - lo)
    return lambda t: mid + amp * np.tanh(slope * (t - shift))


def _limit_values(rng, n):
    return rng.choice([-1.0, 1.0], n) * rng.uniform(0.8, 2.0, n)


def _diag_family(rng, n):
    lo, hi = _limit_values(rng, n), _limit_values(rng, n)
    slope = rng.uniform(0.8, 2.0, n)
    shift = rng.uniform(-1.0, 1.0, n)
    d = _sigmoid_entries(lo, hi, slope, shift)
    return d, np.diag(lo), np.diag(hi)


def _random_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def battery_member(seed, index):
    """Member ``index`` of the seeded battery (reproducible on its own)."""
    rng = np.random.default_rng([int(seed), int(index)])
    family = FAMILIES[index % len(FAMILIES)]
    n = int(rng.choice([1, 2, 2, 3, 3, 3, 4, 4, 5, 6]))
    name = f"battery-{seed}-{index}-{family}"
    if family == "diagonal":
        d, lo, hi = _diag_family(rng, n)
        return OperatorPath.from_function(lambda t: np.diag(d(t)), WINDOW, lo, hi, name=name)
    if family == "rotated":
        # frame rotating from Q0 to Q0 e^{theta K} across t = 0
        d, lo, hi = _diag_family(rng, n)
        Q0 = _random_orthogonal(rng, n)
        G = rng.standard_normal((n, n))
        K = (G - G.T) / max(np.linalg.norm(G - G.T, 2), 1e-12)
        theta = rng.uniform(0.3, 1.5)
        frame = lambda t: Q0 @ sla.expm(0.5 * (1.0 + np.tanh(t)) * theta * K)
        Qm, Qp = Q0, Q0 @ sla.expm(theta * K)
        f = lambda t: (lambda Q: Q @ np.diag(d(t)) @ Q.T)(frame(t))
        return OperatorPath.from_function(f, WINDOW, Qm @ lo @ Qm.T, Qp @ hi @ Qp.T, name=name)
    if family == "patched":
        dx = int(rng.integers(0, n + 1))
        dy = int(rng.integers(0, n + 1))
        X = Subspace.span(rng.standard_normal((n, dx)), n=n) if dx else Subspace.zero(n)
        Y = Subspace.span(rng.standard_normal((n, dy)), n=n) if dy else Subspace.zero(n)
        p = patch_path(X, Y, WINDOW)
        p.name = name
        return p
    # perturbed: non-normal conjugate of a diagonal path plus a decaying kick
    d, lo, hi = _diag_family(rng, n)
    G = rng.standard_normal((n, n))
    S = np.eye(n) + 0.3 * G / max(np.linalg.norm(G, 2), 1e-12)
    Sinv = np.linalg.inv(S)
    K = rng.standard_normal((n, n))
    K *= 0.2 / max(np.linalg.norm(K, 2), 1e-12)
    f = lambda t: S @ np.diag(d(t)) @ Sinv + K / np.cosh(t)
    return OperatorPath.from_function(f, WINDOW, S @ lo @ Sinv, S @ hi @ Sinv, name=name)


def random_battery(seed=7, count=50):
    return [battery_member(seed, i) for i in range(count)]


@dataclass
class PathSpec:
    """JSON-serializable description of a path (or a battery)."""

    dim: int
    kind: str
    name: str | None = None
    params: dict = field(default_factory=dict)
    times: list | None = None
    matrices: list | None = None
    limit_minus: list | None = None
    limit_plus: list | None = None

    def __post_init__(self):
        if self.kind not in ("samples", "preset"):
            raise InputError(f"unknown path kind {self.kind!r}")
        if self.kind == "preset" and self.name not in PRESETS:
            raise InputError(f"unknown preset {self.name!r}; choose from {', '.join(PRESETS)}")
        if self.kind == "samples":
            n = int(self.dim)
            if self.times is None or self.matrices is None:
                raise InputError("sample specs need times and matrices")
            t = np.asarray(self.times, dtype=float)
            if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
                raise InputError("sample times must be strictly increasing")
            if len(self.matrices) != t.size or any(len(m) != n * n for m in self.matrices):
                raise InputError("each sample needs dim*dim row-major entries")
            for L in (self.limit_minus, self.limit_plus):
                if L is None or len(L) != n * n:
                    raise InputError("sample specs need row-major limit matrices")

    def to_dict(self):
        out = {"dim": self.dim, "kind": self.kind}
        if self.kind == "preset":
            out.update(name=self.name, params=self.params)
        else:
            out.update(times=self.times, matrices=self.matrices,
                       limit_minus=self.limit_minus, limit_plus=self.limit_plus)
            if self.name is not None:
                out["name"] = self.name
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise InputError("path spec must be a JSON object")
        unknown = set(d) - {"dim", "kind", "name", "params", "times", "matrices", "limit_minus", "limit_plus"}
        if unknown:
            raise InputError(f"unknown path spec fields: {sorted(unknown)}")
        try:
            return cls(int(d["dim"]), d["kind"], d.get("name"), dict(d.get("params") or {}),
                       d.get("times"), d.get("matrices"), d.get("limit_minus"), d.get("limit_plus"))
        except KeyError as exc:
            raise InputError(f"path spec is missing {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise InputError(f"malformed path spec: {exc}") from exc

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc}") from exc

    @classmethod
    def from_path(cls, path, times):
        """Sample ``path`` at ``times`` (limits are copied)."""
        M = path.sample(times)
        if np.iscomplexobj(M):
            raise InputError("sample specs hold real matrices only")
        n = path.n
        flat = lambda A: [float(v) for v in np.asarray(A, dtype=float).reshape(-1)]
        return cls(n, "samples", path.name, {}, [float(t) for t in times], [flat(A) for A in M],
                   flat(path.limit_minus), flat(path.limit_plus))

    def paths(self):
        """Realize the spec as a list of paths (a battery yields several)."""
        n = int(self.dim)
        if self.kind == "samples":
            M = np.array(self.matrices, dtype=float).reshape(len(self.times), n, n)
            return [OperatorPath(self.times, M, np.reshape(self.limit_minus, (n, n)),
                                 np.reshape(self.limit_plus, (n, n)), name=self.name)]
        p = self.params
        if self.name == "tanh-diag":
            return [tanh_diag()]
        if self.name == "scalar-tanh":
            return [scalar_tanh(bool(p.get("reversed", False)))]
        if self.name == "rotation":
            return [rotation(float(p.get("angle", 1.0)))]
        if self.name == "patch":
            X = _subspace(p.get("x", []), n)
            Y = _subspace(p.get("y", []), n)
            return [patch_path(X, Y, WINDOW)]
        return random_battery(int(p.get("seed", 7)), int(p.get("count", 50)))


def _subspace(vectors, n):
    V = np.asarray(vectors, dtype=float)
    if V.size == 0:
        return Subspace.zero(n)
    if V.ndim != 2 or V.shape[1] != n:
        raise InputError("subspace data must be a list of vectors of length dim")
    return Subspace.span(V.T, n=n)


def preset_spec(name, **params):
    dims = {"tanh-diag": 2, "scalar-tanh": 1, "rotation": 2}
    dim = params.pop("dim", dims.get(name, 0))
    return PathSpec(int(dim), "preset", name, params)
