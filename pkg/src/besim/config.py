"""Sectioned key=value run configuration.

Sections: [grid], [params], [step], [diagnostics], [experiment], [io].
Unknown sections or keys are rejected by name; missing required keys are
named. Everything except [grid] dims has a documented default.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .errors import ConfigurationError

_SCHEMES = ("imex", "imex-picard", "rk4")
_EXPERIMENTS = ("single", "twin", "decay-sweep", "equality-study")
_IC_KINDS = ("uniaxial", "random", "checkpoint")
_DIRECTORS = ("x", "y", "z", "twist")

_ALLOWED = {
    "grid": {"dims", "box"},
    "params": {"a", "b", "c", "L", "Gamma", "mu", "xi"},
    "step": {"scheme", "dt", "picard_tol", "picard_max_iter", "cfl_limit"},
    "diagnostics": {"stride", "serrin_p", "sobolev_s", "probe_identities"},
    "experiment": {
        "kind", "T", "seed", "n_samples",
        "ic", "ic_seed", "ic_s", "ic_director", "ic_spectrum",
        "ic_q_amplitude", "ic_u_amplitude", "ic_path",
        "scheme_b", "dt_b", "twin_p", "perturbation", "gronwall_refine",
        "amplitudes", "dts", "grids",
    },
    "io": {"out", "checkpoint_stride"},
}


@dataclass(frozen=True)
class IcSpec:
    kind: str = "random"
    seed: int = 0
    s: float = 0.1
    director: str = "x"
    spectrum: float = 4.0
    q_amplitude: float = 0.1
    u_amplitude: float = 0.1
    path: str = ""


@dataclass(frozen=True)
class RunConfig:
    dims: tuple[int, int, int]
    box: tuple[float, float, float]
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    L: float = 1.0
    Gamma: float = 1.0
    mu: float = 1.0
    xi: float = 0.0
    scheme: str = "imex"
    dt: float | None = None  # None -> derived from the CFL guard at run time
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    cfl_limit: float = 0.5
    stride: int = 1
    serrin_p: tuple[float, ...] = (2.0, 3.0, 6.0)
    sobolev_s: int = 2
    probe_identities: bool = True
    experiment: str = "single"
    t_end: float = 1.0
    seed: int = 0
    n_samples: int = 32
    ic: IcSpec = field(default_factory=IcSpec)
    scheme_b: str = "imex"
    dt_b: float | None = None
    twin_p: float = 4.0
    perturbation: float = 0.0
    gronwall_refine: bool = False
    amplitudes: tuple[float, ...] = (1e-3,)
    dts: tuple[float, ...] = (4e-3, 2e-3, 1e-3)
    grids: tuple[tuple[int, int, int], ...] = ()
    out: str = "besim-out"
    checkpoint_stride: int = 0


def _parse_ints(text: str, n: int | None = None):
    parts = text.replace(",", " ").split()
    try:
        values = tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ConfigurationError(f"expected integers, got {text!r}") from exc
    if n is not None and len(values) != n:
        raise ConfigurationError(f"expected {n} integers, got {text!r}")
    return values


def _parse_floats(text: str, n: int | None = None):
    parts = text.replace(",", " ").split()
    try:
        values = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigurationError(f"expected numbers, got {text!r}") from exc
    if n is not None and len(values) != n:
        raise ConfigurationError(f"expected {n} numbers, got {text!r}")
    return values


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"expected a boolean, got {text!r}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate the sectioned key=value configuration text."""
    parser = configparser.ConfigParser(strict=True, interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax error: {exc}") from exc

    unknown_sections = [s for s in parser.sections() if s not in _ALLOWED]
    if unknown_sections:
        raise ConfigurationError(f"unknown config sections: {unknown_sections}")
    for section in parser.sections():
        unknown = sorted(set(parser[section]) - _ALLOWED[section])
        if unknown:
            raise ConfigurationError(f"unknown keys in [{section}]: {unknown}")

    if "grid" not in parser or "dims" not in parser["grid"]:
        raise ConfigurationError("missing required key: [grid] dims")

    def get(section, key, default=None):
        if section in parser and key in parser[section]:
            return parser[section][key]
        return default

    dims = _parse_ints(parser["grid"]["dims"], 3)
    box_text = get("grid", "box")
    if box_text is None:
        box = (2.0 * math.pi,) * 3
    else:
        values = _parse_floats(box_text)
        if len(values) == 1:
            box = values * 3
        elif len(values) == 3:
            box = values
        else:
            raise ConfigurationError(f"[grid] box needs 1 or 3 values, got {box_text!r}")

    kwargs: dict = {"dims": dims, "box": box}
    for key in ("a", "b", "c", "L", "Gamma", "mu", "xi"):
        raw = get("params", key)
        if raw is not None:
            kwargs[key] = _parse_floats(raw, 1)[0]

    scheme = get("step", "scheme", "imex")
    if scheme not in _SCHEMES:
        raise ConfigurationError(f"[step] scheme must be one of {_SCHEMES}, got {scheme!r}")
    kwargs["scheme"] = scheme
    if get("step", "dt") is not None:
        dt = _parse_floats(get("step", "dt"), 1)[0]
        if dt <= 0.0:
            raise ConfigurationError(f"[step] dt must be positive, got {dt}")
        kwargs["dt"] = dt
    if get("step", "picard_tol") is not None:
        kwargs["picard_tol"] = _parse_floats(get("step", "picard_tol"), 1)[0]
    if get("step", "picard_max_iter") is not None:
        kwargs["picard_max_iter"] = _parse_ints(get("step", "picard_max_iter"), 1)[0]
    if get("step", "cfl_limit") is not None:
        kwargs["cfl_limit"] = _parse_floats(get("step", "cfl_limit"), 1)[0]

    if get("diagnostics", "stride") is not None:
        stride = _parse_ints(get("diagnostics", "stride"), 1)[0]
        if stride < 1:
            raise ConfigurationError(f"[diagnostics] stride must be >= 1, got {stride}")
        kwargs["stride"] = stride
    if get("diagnostics", "serrin_p") is not None:
        p_values = _parse_floats(get("diagnostics", "serrin_p"))
        for p in p_values:
            if not (2.0 <= p <= 6.0):
                raise ConfigurationError(
                    f"p={p} outside [2, 6]; the uniqueness criterion restricts 2 <= p <= 6"
                )
        kwargs["serrin_p"] = p_values
    if get("diagnostics", "sobolev_s") is not None:
        s = _parse_ints(get("diagnostics", "sobolev_s"), 1)[0]
        if s < 0:
            raise ConfigurationError(f"[diagnostics] sobolev_s must be >= 0, got {s}")
        kwargs["sobolev_s"] = s
    if get("diagnostics", "probe_identities") is not None:
        kwargs["probe_identities"] = _parse_bool(get("diagnostics", "probe_identities"))

    kind = get("experiment", "kind", "single")
    if kind not in _EXPERIMENTS:
        raise ConfigurationError(f"[experiment] kind must be one of {_EXPERIMENTS}, got {kind!r}")
    kwargs["experiment"] = kind
    if get("experiment", "T") is not None:
        t_end = _parse_floats(get("experiment", "T"), 1)[0]
        if t_end < 0.0:
            raise ConfigurationError(f"[experiment] T must be nonnegative, got {t_end}")
        kwargs["t_end"] = t_end
    if get("experiment", "seed") is not None:
        kwargs["seed"] = _parse_ints(get("experiment", "seed"), 1)[0]
    if get("experiment", "n_samples") is not None:
        n = _parse_ints(get("experiment", "n_samples"), 1)[0]
        if n < 1:
            raise ConfigurationError(f"[experiment] n_samples must be >= 1, got {n}")
        kwargs["n_samples"] = n

    ic_kwargs: dict = {}
    ic_kind = get("experiment", "ic", "random")
    if ic_kind not in _IC_KINDS:
        raise ConfigurationError(f"[experiment] ic must be one of {_IC_KINDS}, got {ic_kind!r}")
    ic_kwargs["kind"] = ic_kind
    if get("experiment", "ic_seed") is not None:
        ic_kwargs["seed"] = _parse_ints(get("experiment", "ic_seed"), 1)[0]
    if get("experiment", "ic_s") is not None:
        ic_kwargs["s"] = _parse_floats(get("experiment", "ic_s"), 1)[0]
    director = get("experiment", "ic_director")
    if director is not None:
        if director not in _DIRECTORS:
            raise ConfigurationError(
                f"[experiment] ic_director must be one of {_DIRECTORS}, got {director!r}"
            )
        ic_kwargs["director"] = director
    if get("experiment", "ic_spectrum") is not None:
        ic_kwargs["spectrum"] = _parse_floats(get("experiment", "ic_spectrum"), 1)[0]
    if get("experiment", "ic_q_amplitude") is not None:
        ic_kwargs["q_amplitude"] = _parse_floats(get("experiment", "ic_q_amplitude"), 1)[0]
    if get("experiment", "ic_u_amplitude") is not None:
        ic_kwargs["u_amplitude"] = _parse_floats(get("experiment", "ic_u_amplitude"), 1)[0]
    if get("experiment", "ic_path") is not None:
        ic_kwargs["path"] = get("experiment", "ic_path")
    if ic_kind == "checkpoint" and not ic_kwargs.get("path"):
        raise ConfigurationError("[experiment] ic = checkpoint requires ic_path")
    kwargs["ic"] = IcSpec(**ic_kwargs)

    scheme_b = get("experiment", "scheme_b", "imex")
    if scheme_b not in _SCHEMES:
        raise ConfigurationError(f"[experiment] scheme_b must be one of {_SCHEMES}")
    kwargs["scheme_b"] = scheme_b
    if get("experiment", "dt_b") is not None:
        kwargs["dt_b"] = _parse_floats(get("experiment", "dt_b"), 1)[0]
    if get("experiment", "twin_p") is not None:
        twin_p = _parse_floats(get("experiment", "twin_p"), 1)[0]
        if not (2.0 <= twin_p <= 6.0):
            raise ConfigurationError(
                f"p={twin_p} outside [2, 6]; the uniqueness criterion restricts 2 <= p <= 6"
            )
        kwargs["twin_p"] = twin_p
    if get("experiment", "perturbation") is not None:
        kwargs["perturbation"] = _parse_floats(get("experiment", "perturbation"), 1)[0]
    if get("experiment", "gronwall_refine") is not None:
        kwargs["gronwall_refine"] = _parse_bool(get("experiment", "gronwall_refine"))
    if get("experiment", "amplitudes") is not None:
        kwargs["amplitudes"] = _parse_floats(get("experiment", "amplitudes"))
    if get("experiment", "dts") is not None:
        kwargs["dts"] = _parse_floats(get("experiment", "dts"))
    if get("experiment", "grids") is not None:
        flat = _parse_ints(get("experiment", "grids"))
        if len(flat) % 3 != 0:
            raise ConfigurationError("[experiment] grids must be triples of integers")
        kwargs["grids"] = tuple(tuple(flat[i:i + 3]) for i in range(0, len(flat), 3))

    if get("io", "out") is not None:
        kwargs["out"] = get("io", "out")
    if get("io", "checkpoint_stride") is not None:
        stride = _parse_ints(get("io", "checkpoint_stride"), 1)[0]
        if stride < 0:
            raise ConfigurationError("[io] checkpoint_stride must be >= 0")
        kwargs["checkpoint_stride"] = stride

    config = RunConfig(**kwargs)
    _semantic_checks(config)
    return config


def _semantic_checks(config: RunConfig) -> None:
    for n in config.dims:
        if n < 4 or n % 2 != 0:
            raise ConfigurationError(f"grid dims must be even and >= 4, got {config.dims}")
    for b in config.box:
        if not b > 0.0:
            raise ConfigurationError(f"box lengths must be positive, got {config.box}")
    if config.experiment == "decay-sweep" and config.a <= 0.0:
        raise ConfigurationError(
            f"decay-sweep requires a > 0 (global decay hypothesis), got a = {config.a}"
        )
    if config.experiment == "equality-study":
        grids = config.grids or (config.dims,)
        if max(len(config.dts), len(grids)) < 3:
            raise ConfigurationError("equality-study needs >= 3 refinements on one ladder")


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
