"""JSON run configuration: parsing, validation and the resolved echo."""

import json
from dataclasses import dataclass, field
from typing import List

from .errors import ConfigError
from .memory import QUADRATURE_MODES
from .mesh import MAX_DEGREE, MAX_QUAD_POINTS
from .stepper import SCHEMES, resolve_scheme
from .assembly import default_epsilon

_KNOWN_FIELDS = {
    "domain", "T", "p", "kernel", "lambda", "r", "m", "N", "tol", "max_iter",
    "epsilon", "scheme", "quadrature_points", "quadrature_mode",
    "snapshot_times", "output_dir",
}


@dataclass
class RunConfig:
    """Fully resolved configuration for one solve (all defaults filled in)."""

    domain: tuple
    T: float
    p: float
    kernel_lambda: float
    r: int
    m: int
    N: int
    tol: float
    max_iter: int
    epsilon: float
    scheme: str
    quadrature_points: int
    quadrature_mode: str
    snapshot_times: List[float] = field(default_factory=list)
    output_dir: str = "out"
    kernel_type: str = "exponential"

    @property
    def delta(self) -> float:
        return self.T / self.N


def _require(raw: dict, key: str):
    if key not in raw:
        raise ConfigError(key, "required field is missing")
    return raw[key]


def _as_number(key, value, *, integer=False, minimum=None, strict_min=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(key, f"expected an integer, got {value!r}")
    value = int(value) if integer else float(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise ConfigError(key, "must be finite")
    if minimum is not None and value < minimum:
        raise ConfigError(key, f"must be >= {minimum}, got {value}")
    if strict_min is not None and value <= strict_min:
        raise ConfigError(key, f"must be > {strict_min}, got {value}")
    return value


def validate_config(raw: dict) -> RunConfig:
    """Turn a raw JSON dictionary into a fully resolved RunConfig.

    Any missing optional field gets its documented default; every error
    names the offending field.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a JSON object")
    unknown = set(raw) - _KNOWN_FIELDS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")

    dom = _require(raw, "domain")
    if isinstance(dom, dict):
        dom = [dom.get("a"), dom.get("b")]
    if (not isinstance(dom, (list, tuple)) or len(dom) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float))
                   for v in dom)):
        raise ConfigError("domain", f"expected [a, b], got {dom!r}")
    a, b = float(dom[0]), float(dom[1])
    if not b > a:
        raise ConfigError("domain", f"need b > a, got [{a}, {b}]")

    T = _as_number("T", _require(raw, "T"), strict_min=0.0)
    p = _as_number("p", _require(raw, "p"), strict_min=1.0)
    r = _as_number("r", _require(raw, "r"), integer=True, minimum=1)
    if r > MAX_DEGREE:
        raise ConfigError("r", f"must be <= {MAX_DEGREE}, got {r}")
    m = _as_number("m", _require(raw, "m"), integer=True, minimum=1)
    n_steps = _as_number("N", _require(raw, "N"), integer=True, minimum=1)

    # kernel: nested object, or the top-level "lambda" shorthand
    if "kernel" in raw:
        ker = raw["kernel"]
        if not isinstance(ker, dict):
            raise ConfigError("kernel", f"expected an object, got {ker!r}")
        if ker.get("type", "exponential") != "exponential":
            raise ConfigError("kernel", f"unsupported type {ker.get('type')!r}; "
                              "only \"exponential\" is built in")
        lam = _as_number("kernel.lambda", ker.get("lambda", 0.0))
    elif "lambda" in raw:
        lam = _as_number("lambda", raw["lambda"])
    else:
        raise ConfigError("kernel", "required field is missing "
                          "(give kernel.lambda or a top-level lambda)")

    tol = _as_number("tol", raw.get("tol", 1e-9), strict_min=0.0)
    max_iter = _as_number("max_iter", raw.get("max_iter", 100),
                          integer=True, minimum=2)

    epsilon = raw.get("epsilon")
    if epsilon is None:
        epsilon = default_epsilon(p)
    else:
        epsilon = _as_number("epsilon", epsilon, minimum=0.0)
    if p < 2.0 and epsilon == 0.0:
        raise ConfigError("epsilon", f"p = {p} < 2 needs a positive "
                          "regularization")

    scheme = raw.get("scheme", "auto")
    if scheme not in SCHEMES:
        raise ConfigError("scheme", f"must be one of {SCHEMES}, got {scheme!r}")
    scheme = resolve_scheme(p, scheme)

    q = raw.get("quadrature_points")
    if q is None:
        q = r + 2
    else:
        q = _as_number("quadrature_points", q, integer=True, minimum=1)
    if q > MAX_QUAD_POINTS:
        raise ConfigError("quadrature_points",
                          f"must be <= {MAX_QUAD_POINTS}, got {q}")

    mode = raw.get("quadrature_mode", "consistent")
    if mode not in QUADRATURE_MODES:
        raise ConfigError("quadrature_mode",
                          f"must be one of {QUADRATURE_MODES}, got {mode!r}")

    snaps = raw.get("snapshot_times")
    if snaps is None:
        snaps = [0.0, T / 2.0, T]
    if (not isinstance(snaps, list)
            or any(isinstance(v, bool) or not isinstance(v, (int, float))
                   for v in snaps)):
        raise ConfigError("snapshot_times", f"expected a list of times, got {snaps!r}")
    snaps = [float(v) for v in snaps]
    if any(not 0.0 <= v <= T for v in snaps):
        raise ConfigError("snapshot_times", f"times must lie in [0, {T}]")

    out_dir = raw.get("output_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output_dir", f"expected a non-empty string, got {out_dir!r}")

    return RunConfig(domain=(a, b), T=T, p=p, kernel_lambda=lam, r=r, m=m,
                     N=n_steps, tol=tol, max_iter=max_iter, epsilon=epsilon,
                     scheme=scheme, quadrature_points=q, quadrature_mode=mode,
                     snapshot_times=snaps, output_dir=out_dir)


def parse_config(path) -> RunConfig:
    """Load and validate a JSON configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc}") from exc
    return validate_config(raw)


def config_to_dict(cfg: RunConfig) -> dict:
    """Normalized dictionary form; parse(write(cfg)) round-trips exactly."""
    return {
        "domain": [cfg.domain[0], cfg.domain[1]],
        "T": cfg.T,
        "p": cfg.p,
        "kernel": {"type": cfg.kernel_type, "lambda": cfg.kernel_lambda},
        "r": cfg.r,
        "m": cfg.m,
        "N": cfg.N,
        "tol": cfg.tol,
        "max_iter": cfg.max_iter,
        "epsilon": cfg.epsilon,
        "scheme": cfg.scheme,
        "quadrature_points": cfg.quadrature_points,
        "quadrature_mode": cfg.quadrature_mode,
        "snapshot_times": cfg.snapshot_times,
        "output_dir": cfg.output_dir,
    }


def write_config_echo(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")
