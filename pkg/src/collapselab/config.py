"""Scenario configuration: TOML schema, parsing, and upfront validation.

One scenario per file.  Every module precondition reachable from a config
is exercised while parsing (models, grids, states, and decompositions are
built here), so bad input fails before any computation starts.

Schema (sections by scenario kind; see README for the full reference):

    [scenario]  kind, seed, workers?
    [output]    directory?
    [model]     dimension, profile, rate          (all kinds except grw)
    [grid]      points, spacing, alpha, omega     (grw only)
    [ensemble]  size, initial_real, initial_imag? (collapse, density)
    [times]     grid
    [collapse]  epsilon?, sectors?                (collapse only)
    [kernel]    bins?, chains?, fd_steps?, reconstruction_times?,
                starts?, eval_times?, tolerance?  (spectral, equal-gap)
    [gisin]     size, negative_control?, decomposition_a, decomposition_b
    [grw]       size, packet_width, separations?, rate_tolerance?
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .density_matrix import ensemble_density
from .errors import PreconditionError
from .grw import GrwGrid, gaussian_packet
from .hilbert import Ensemble, SectorMap, StateVector, normalize
from .jump_engine import JumpModel, make_bell_jump

KINDS = ("collapse", "spectral", "equal-gap", "density", "gisin", "grw")


class ConfigError(ValueError):
    """Config file could not be parsed against the schema."""


@dataclass
class ScenarioConfig:
    """Validated scenario: every object below passed its module checks."""

    kind: str
    seed: int
    workers: int
    out_dir: Path | None
    echo: dict

    model: JumpModel | None = None
    grid: GrwGrid | None = None
    initial: StateVector | None = None
    ensemble_size: int = 0
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sectors: SectorMap | None = None
    collapse_eps: float = 1e-3
    kernel_bins: int = 101
    kernel_chains: int = 20
    fd_steps: tuple = (1e-2, 1e-3)
    reconstruction_times: tuple = (0.3, 2.0)
    equalgap_starts: int = 10
    equalgap_tolerance: float = 1e-8
    decomp_a: Ensemble | None = None
    decomp_b: Ensemble | None = None
    negative_control: bool = False
    packet_width: float = 1.0
    separations: tuple = (1.0, 2.0)
    rate_tolerance: float = 0.10


def _section(data: dict, name: str, required: bool = True) -> dict:
    value = data.get(name)
    if value is None:
        if required:
            raise ConfigError(f"missing section [{name}]")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value


def _get(table: dict, section: str, key: str, types, required: bool = True, default=None):
    if key not in table:
        if required:
            raise ConfigError(f"missing field {section}.{key}")
        return default
    value = table[key]
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ConfigError(f"{section}.{key} has wrong type (bool)")
    if not isinstance(value, types):
        raise ConfigError(f"{section}.{key} has wrong type ({type(value).__name__})")
    return value


def _float_list(table: dict, section: str, key: str, required: bool = True, default=None):
    raw = _get(table, section, key, list, required, default)
    if raw is None:
        return default
    out = []
    for k, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{section}.{key}[{k}] must be a number")
        out.append(float(v))
    return out


def _state(table: dict, section: str) -> StateVector:
    re = _float_list(table, section, "state_real" if "state_real" in table else "initial_real")
    key_im = "state_imag" if "state_real" in table else "initial_imag"
    im = _float_list(table, section, key_im, required=False)
    if im is not None and len(im) != len(re):
        raise ConfigError(f"{section}: real and imaginary parts must match in length")
    amps = np.asarray(re, dtype=complex)
    if im is not None:
        amps = amps + 1j * np.asarray(im)
    return normalize(amps)


def _decomposition(tables, section: str, seed: int) -> Ensemble:
    if not isinstance(tables, list) or not tables:
        raise ConfigError(f"{section} must be a non-empty array of tables")
    members = []
    for k, t in enumerate(tables):
        if not isinstance(t, dict):
            raise ConfigError(f"{section}[{k}] must be a table")
        w = _get(t, f"{section}[{k}]", "weight", (int, float))
        members.append((_state(t, f"{section}[{k}]"), float(w)))
    return Ensemble.from_members(members, seed=seed)


def _times(data: dict) -> np.ndarray:
    grid = np.asarray(_float_list(_section(data, "times"), "times", "grid"), dtype=float)
    if grid.size == 0:
        raise ConfigError("times.grid must be non-empty")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("times.grid must be strictly increasing")
    if grid[0] < 0:
        raise ConfigError("times.grid must be nonnegative")
    return grid


def _model(data: dict) -> JumpModel:
    table = _section(data, "model")
    d = _get(table, "model", "dimension", int)
    profile = _float_list(table, "model", "profile")
    rate = float(_get(table, "model", "rate", (int, float)))
    return make_bell_jump(d, np.asarray(profile), rate)


def _grid(data: dict) -> GrwGrid:
    table = _section(data, "grid")
    return GrwGrid(
        points=_get(table, "grid", "points", int),
        spacing=float(_get(table, "grid", "spacing", (int, float))),
        alpha=float(_get(table, "grid", "alpha", (int, float))),
        omega=float(_get(table, "grid", "omega", (int, float))),
    )


def load_config(path, seed=None, workers=None, out_dir=None) -> ScenarioConfig:
    """Parse and validate a scenario file; CLI overrides are applied here.

    Raises ConfigError for schema problems (exit code 2 territory) and
    PreconditionError when a value violates a module contract (exit 3).
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as err:
        raise ConfigError(f"invalid TOML: {err}") from err

    scenario = _section(data, "scenario")
    kind = _get(scenario, "scenario", "kind", str)
    if kind not in KINDS:
        raise ConfigError(f"scenario.kind must be one of {', '.join(KINDS)}")
    cfg_seed = _get(scenario, "scenario", "seed", int)
    cfg_workers = _get(scenario, "scenario", "workers", int, required=False, default=1)
    out_table = _section(data, "output", required=False)
    cfg_out = _get(out_table, "output", "directory", str, required=False)

    seed = int(cfg_seed if seed is None else seed)
    workers = int(cfg_workers if workers is None else workers)
    if workers < 1:
        raise PreconditionError("worker count must be >= 1")
    out = Path(out_dir) if out_dir else (Path(cfg_out) if cfg_out else None)

    echo = {
        "scenario": {"kind": kind, "seed": seed},
        **{
            name: dict(data[name])
            for name in ("model", "grid", "ensemble", "times", "collapse", "kernel", "gisin", "grw")
            if name in data
        },
    }

    cfg = ScenarioConfig(kind=kind, seed=seed, workers=workers, out_dir=out, echo=echo)

    if kind == "grw":
        cfg.grid = _grid(data)
        table = _section(data, "grw")
        cfg.ensemble_size = _get(table, "grw", "size", int)
        if cfg.ensemble_size < 2:
            raise PreconditionError("grw.size must be at least 2 trajectories")
        cfg.packet_width = float(_get(table, "grw", "packet_width", (int, float)))
        cfg.separations = tuple(
            _float_list(table, "grw", "separations", required=False, default=[1.0, 2.0])
        )
        cfg.rate_tolerance = float(
            _get(table, "grw", "rate_tolerance", (int, float), required=False, default=0.10)
        )
        if not 0 < cfg.rate_tolerance < 1:
            raise PreconditionError("grw.rate_tolerance must be in (0, 1)")
        cfg.times = _times(data)
        if cfg.times[0] == 0.0:
            raise ConfigError("grw times.grid must start after 0")
        # builds the packet now so width/grid mismatches surface here
        cfg.initial = gaussian_packet(cfg.grid, cfg.packet_width)
        return cfg

    cfg.model = _model(data)

    if kind in ("collapse", "density"):
        table = _section(data, "ensemble")
        cfg.ensemble_size = _get(table, "ensemble", "size", int)
        if cfg.ensemble_size < 1:
            raise PreconditionError("ensemble.size must be >= 1")
        cfg.initial = _state(table, "ensemble")
        if cfg.initial.dim != cfg.model.dim:
            raise PreconditionError(
                "ensemble.initial dimension does not match model.dimension"
            )
        cfg.times = _times(data)

    if kind == "collapse":
        table = _section(data, "collapse", required=False)
        cfg.collapse_eps = float(
            _get(table, "collapse", "epsilon", (int, float), required=False, default=1e-3)
        )
        if not 0 < cfg.collapse_eps < 1:
            raise PreconditionError("collapse.epsilon must be in (0, 1)")
        labels = _get(table, "collapse", "sectors", list, required=False)
        if labels is None:
            cfg.sectors = SectorMap.singletons(cfg.model.dim)
        else:
            cfg.sectors = SectorMap(np.asarray(labels, dtype=int))
            if cfg.sectors.dim != cfg.model.dim:
                raise PreconditionError("collapse.sectors length must match dimension")

    if kind in ("spectral", "equal-gap"):
        if cfg.model.dim != 2:
            raise PreconditionError(f"{kind} scenarios require model.dimension = 2")
        table = _section(data, "kernel", required=False)
        cfg.kernel_bins = _get(table, "kernel", "bins", int, required=False, default=101)
        if cfg.kernel_bins < 3:
            raise PreconditionError("kernel.bins must be >= 3")
        if kind == "spectral":
            cfg.kernel_chains = _get(table, "kernel", "chains", int, required=False, default=20)
            if cfg.kernel_chains < 1:
                raise PreconditionError("kernel.chains must be >= 1")
            cfg.fd_steps = tuple(
                _float_list(table, "kernel", "fd_steps", required=False, default=[1e-2, 1e-3])
            )
            if len(cfg.fd_steps) != 2 or cfg.fd_steps[0] <= cfg.fd_steps[1] or cfg.fd_steps[1] <= 0:
                raise PreconditionError("kernel.fd_steps must be two decreasing positive steps")
            cfg.reconstruction_times = tuple(
                _float_list(
                    table, "kernel", "reconstruction_times", required=False, default=[0.3, 2.0]
                )
            )
            if any(t < 0 for t in cfg.reconstruction_times):
                raise PreconditionError("kernel.reconstruction_times must be nonnegative")
        else:
            cfg.equalgap_starts = _get(table, "kernel", "starts", int, required=False, default=10)
            if cfg.equalgap_starts < 1:
                raise PreconditionError("kernel.starts must be >= 1")
            cfg.times = np.asarray(
                _float_list(table, "kernel", "eval_times", required=False, default=[0.1, 1.0, 10.0])
            )
            if np.any(cfg.times < 0):
                raise PreconditionError("kernel.eval_times must be nonnegative")
            cfg.equalgap_tolerance = float(
                _get(table, "kernel", "tolerance", (int, float), required=False, default=1e-8)
            )

    if kind == "gisin":
        table = _section(data, "gisin")
        cfg.ensemble_size = _get(table, "gisin", "size", int)
        if cfg.ensemble_size < 2:
            raise PreconditionError("gisin.size must be >= 2")
        cfg.negative_control = _get(
            table, "gisin", "negative_control", bool, required=False, default=False
        )
        cfg.decomp_a = _decomposition(table.get("decomposition_a"), "gisin.decomposition_a", seed * 2 + 1)
        cfg.decomp_b = _decomposition(table.get("decomposition_b"), "gisin.decomposition_b", seed * 2 + 2)
        if cfg.decomp_a.dim != cfg.model.dim or cfg.decomp_b.dim != cfg.model.dim:
            raise PreconditionError("gisin decomposition dimensions must match the model")
        if cfg.ensemble_size < max(len(cfg.decomp_a), len(cfg.decomp_b)):
            raise PreconditionError("gisin.size must cover every decomposition member")
        gap = float(
            np.abs(
                ensemble_density(cfg.decomp_a).matrix
                - ensemble_density(cfg.decomp_b).matrix
            ).max()
        )
        if gap > 1e-10:
            raise PreconditionError(
                f"gisin decompositions have different densities (gap {gap:.3g}); "
                "the comparison is undefined"
            )
        cfg.times = _times(data)

    return cfg
