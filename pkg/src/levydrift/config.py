"""Flat key-value experiment configuration.

Keys carry dotted section prefixes::

    suite = transfer
    seed = 7
    kernel.case = D
    kernel.alpha = 0.5
    grid.N = 64
    solver.dt = 0.01
    velocity.kind = random
    suite.size = 5

``kernel.*`` maps onto :class:`KernelSpec`, ``grid.*`` onto :class:`TorusGrid`,
``solver.*`` onto :class:`SolverConfig`, ``velocity.*`` onto
:class:`VelocityRecipe` and ``molecule.*`` onto :class:`MoleculeFamily`.
``suite.*`` keys are free-form suite parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .exceptions import ConfigError, LevyDriftError
from .field import ScalarField, TorusGrid, make_divfree_velocity, random_stream
from .kernel import KernelSpec
from .solver import SolverConfig

__all__ = [
    "SUITES",
    "VelocityRecipe",
    "MoleculeFamily",
    "ExperimentConfig",
    "parse_experiment",
    "experiment_items",
]

SUITES = (
    "maxprinciple",
    "positivity",
    "symbol",
    "besov",
    "svineq",
    "commutator",
    "molecule",
    "transfer",
    "heatlevy",
)

_VELOCITY_KINDS = ("zero", "static-stream", "time-dependent", "random")


@dataclass(frozen=True)
class VelocityRecipe:
    """How the drift is produced.

    ``zero``: no drift.  ``static-stream``: stream ``amplitude sin(m1 x1) cos(m2 x2)``
    with ``modes = (m1, m2)``.  ``random``: band-limited random stream with
    ``|m| <= kmax`` scaled to ``max|v| = vmax``.  ``time-dependent``: ``frames``
    random streams blended linearly in time.
    """

    kind: str = "zero"
    kmax: int = 4
    vmax: float = 1.0
    amplitude: float = 1.0
    modes: tuple = (1, 1)
    frames: int = 4

    def __post_init__(self):
        if self.kind not in _VELOCITY_KINDS:
            raise ConfigError("velocity.kind", f"must be one of {_VELOCITY_KINDS}")
        if self.kmax < 1:
            raise ConfigError("velocity.kmax", "must be >= 1")
        if not self.vmax >= 0:
            raise ConfigError("velocity.vmax", "must be >= 0")
        if self.frames < 1:
            raise ConfigError("velocity.frames", "must be >= 1")

    def build(self, grid: TorusGrid, rng, steps=1):
        """Return ``None``, a static field or a list of ``steps`` fields."""
        if self.kind == "zero" or self.vmax == 0 and self.kind != "static-stream":
            return None
        if grid.dim != 2:
            raise ConfigError("velocity.kind", "nonzero drift needs grid.dim = 2")
        if self.kind == "static-stream":
            m1, m2 = self.modes
            a = self.amplitude
            phi = ScalarField.from_function(grid, lambda x, y: a * np.sin(m1 * x) * np.cos(m2 * y))
            return make_divfree_velocity(phi)
        if self.kind == "random":
            return make_divfree_velocity(random_stream(grid, rng, self.kmax, self.vmax))
        keys = [random_stream(grid, rng, self.kmax, self.vmax) for _ in range(self.frames)]
        out = []
        for n in range(steps):
            x = 0.0 if steps == 1 else n * (self.frames - 1) / (steps - 1)
            i = min(int(x), self.frames - 2) if self.frames > 1 else 0
            w = x - i if self.frames > 1 else 0.0
            phi = keys[i] * (1 - w) + (keys[i + 1] * w if self.frames > 1 else 0.0)
            out.append(make_divfree_velocity(phi))
        return out


@dataclass(frozen=True)
class MoleculeFamily:
    """Molecule ensemble for the ``molecule`` suite."""

    gamma: float = 0.25
    omega: float = 0.5
    radii: tuple = (0.05, 0.1, 0.2, 0.3, 0.5)
    centers: int = 2
    T0: float = 0.5
    eps_win: float = 0.5
    C_cal: float = 1.0

    def __post_init__(self):
        if not 0 < self.gamma < self.omega < 1:
            raise ConfigError("molecule.omega", "need 0 < gamma < omega < 1")
        if not self.radii or min(self.radii) <= 0:
            raise ConfigError("molecule.radii", "must be a non-empty list of positive radii")
        if self.centers < 1:
            raise ConfigError("molecule.centers", "must be >= 1")
        for name in ("T0", "eps_win", "C_cal"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"molecule.{name}", "must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str
    kernel: KernelSpec
    grid: TorusGrid
    solver: SolverConfig
    velocity: VelocityRecipe
    molecule: MoleculeFamily
    seed: int = 0
    out: Optional[str] = None
    params: dict = field(default_factory=dict)

    def param(self, key, default, kind=float):
        """Typed ``suite.<key>`` lookup; lists are comma separated."""
        if key not in self.params:
            return default
        raw = self.params[key]
        try:
            if kind is list:
                return [float(x) for x in raw.split(",") if x.strip()]
            if kind is bool:
                return raw.strip().lower() in ("1", "true", "yes")
            if kind is str:
                return raw.strip()
            return kind(raw)
        except ValueError as exc:
            raise ConfigError(f"suite.{key}", str(exc)) from None

    def rng(self, *extra):
        return np.random.default_rng(np.random.SeedSequence([self.seed, *extra]))


_DEFAULT_KERNEL = {"case": "D", "alpha": "0.5", "beta": "0.5", "delta": "0.5", "family": "PowerLaw"}


def _typed(section, cls, items, casts):
    kw = {}
    names = {f.name for f in fields(cls)}
    for k, v in items.items():
        if k not in names:
            raise ConfigError(f"{section}.{k}", "unknown key")
        try:
            kw[k] = casts.get(k, float)(v)
        except ValueError as exc:
            raise ConfigError(f"{section}.{k}", str(exc)) from None
    try:
        return cls(**kw)
    except ConfigError:
        raise
    except LevyDriftError as exc:
        raise ConfigError(section, str(exc)) from None


def _bool(v):
    return str(v).strip().lower() in ("1", "true", "yes")


def _floats(v):
    return tuple(float(x) for x in str(v).split(",") if x.strip())


def _ints(v):
    return tuple(int(x) for x in str(v).split(",") if x.strip())


def parse_experiment(items, *, suite=None, seed=None, out=None):
    """Build and validate an :class:`ExperimentConfig` from flat items.

    Command-line values for ``suite``, ``seed`` and ``out`` override the file.
    """
    sections = {"kernel": {}, "grid": {}, "solver": {}, "velocity": {}, "molecule": {}, "suite": {}}
    top = {}
    for key, val in items.items():
        if "." in key:
            sec, sub = key.split(".", 1)
            if sec not in sections:
                raise ConfigError(key, "unknown section")
            sections[sec][sub] = val
        else:
            top[key] = val
    unknown = set(top) - {"suite", "seed", "out"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    suite = suite or top.get("suite")
    if suite not in SUITES:
        raise ConfigError("suite", f"must be one of {SUITES}, got {suite!r}")
    try:
        seed = int(seed if seed is not None else top.get("seed", 0))
    except ValueError:
        raise ConfigError("seed", "must be an integer") from None
    if seed < 0 or seed >= 2**64:
        raise ConfigError("seed", "must fit in an unsigned 64-bit integer")

    kitems = {**_DEFAULT_KERNEL, **sections["kernel"]}
    try:
        kernel = KernelSpec.from_items(kitems)
    except LevyDriftError as exc:
        raise ConfigError("kernel", str(exc)) from None
    gitems = {"dim": str(kernel.dim), "N": "64", **sections["grid"]}
    grid = _typed("grid", TorusGrid, gitems, {"dim": int, "N": int})
    if grid.dim != kernel.dim:
        raise ConfigError("grid.dim", "must match kernel.dim")
    solver = _typed("solver", SolverConfig, sections["solver"],
                    {"scheme": str, "picard_max_iter": int, "mollify": _bool})
    velocity = _typed("velocity", VelocityRecipe, sections["velocity"],
                      {"kind": str, "kmax": int, "frames": int, "modes": _ints})
    molecule = _typed("molecule", MoleculeFamily, sections["molecule"],
                      {"radii": _floats, "centers": int})
    return ExperimentConfig(suite, kernel, grid, solver, velocity, molecule, seed,
                            out if out is not None else top.get("out"), dict(sections["suite"]))


def experiment_items(cfg: ExperimentConfig):
    """Flat items reproducing ``cfg`` (used to record the effective configuration)."""
    items = {"suite": cfg.suite, "seed": str(cfg.seed)}
    for k, v in cfg.kernel.to_items().items():
        items[f"kernel.{k}"] = v
    items["grid.dim"] = str(cfg.grid.dim)
    items["grid.N"] = str(cfg.grid.N)
    items["grid.Lbox"] = repr(cfg.grid.Lbox)
    for f in fields(SolverConfig):
        v = getattr(cfg.solver, f.name)
        items[f"solver.{f.name}"] = v.value if hasattr(v, "value") else (str(v).lower() if isinstance(v, bool) else repr(v))
    for f in fields(VelocityRecipe):
        v = getattr(cfg.velocity, f.name)
        items[f"velocity.{f.name}"] = ",".join(map(str, v)) if isinstance(v, tuple) else (v if isinstance(v, str) else repr(v))
    for f in fields(MoleculeFamily):
        v = getattr(cfg.molecule, f.name)
        items[f"molecule.{f.name}"] = ",".join(map(repr, v)) if isinstance(v, tuple) else repr(v)
    for k, v in cfg.params.items():
        items[f"suite.{k}"] = v
    return items

