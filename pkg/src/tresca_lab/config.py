"""Flat ``key = value`` run configuration.

One pair per line, ``#`` starts a comment, unknown keys are errors.
Defaults reproduce the desk-scale reference experiment.
"""

from dataclasses import dataclass

from .assembly import parse_profile, profile_text


class ConfigError(ValueError):
    pass


def _float(text):
    return float(text)


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _float_list(text):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(s) for s in items)


def _variant(text):
    text = text.strip().lower()
    if text not in ("dirichlet", "robin"):
        raise ValueError("variant must be 'dirichlet' or 'robin'")
    return text


def _str(text):
    if not text.strip():
        raise ValueError("empty value")
    return text.strip()


# key -> (parser, default, validator or None, message)
_SCHEMA = {
    "mesh.nx": (_int, 8, lambda v: v >= 1, "mesh.nx must be >= 1"),
    "mesh.ny": (_int, 8, lambda v: v >= 1, "mesh.ny must be >= 1"),
    "time.T": (_float, 1.0, lambda v: v > 0, "final time must satisfy T > 0"),
    "time.steps": (_int, 16, lambda v: v >= 1, "time.steps must be >= 1"),
    "data.g": (parse_profile, ("const", 1.0), None, ""),
    "data.b": (parse_profile, ("const", 0.0), lambda v: v[0] == "const", "data.b must be a constant"),
    "data.u_b": (parse_profile, ("const", 0.0), None, ""),
    "data.q": (_float, 0.1, lambda v: v > 0, "the Tresca coefficient requires q > 0"),
    "cost.M": (_float, 1.0, lambda v: v > 0, "the cost weight requires M > 0"),
    "solver.eps": (_float, 1e-2, lambda v: v > 0, "regularization requires eps > 0"),
    "solver.tol_newton": (_float, 1e-10, lambda v: v > 0, "solver.tol_newton must be > 0"),
    "solver.max_newton_iters": (_int, 50, lambda v: v >= 1, "solver.max_newton_iters must be >= 1"),
    "solver.variant": (_variant, "dirichlet", None, ""),
    "solver.h": (_float, 1000.0, lambda v: v > 0, "the Robin coefficient requires h > 0"),
    "opt.tol": (_float, 1e-8, lambda v: v > 0, "opt.tol must be > 0"),
    "opt.max_iters": (_int, 500, lambda v: v >= 0, "opt.max_iters must be >= 0"),
    "opt.f_init": (_float, 0.0, lambda v: v <= 0, "opt.f_init must satisfy f <= 0"),
    "control.f": (_float, -0.5, lambda v: v <= 0, "control.f must satisfy f <= 0"),
    "check.f1": (_float, 0.0, lambda v: v <= 0, "check.f1 must satisfy f <= 0"),
    "check.f2": (_float, -1.0, lambda v: v <= 0, "check.f2 must satisfy f <= 0"),
    "check.mu_list": (_float_list, (0.25, 0.5, 0.75), lambda v: all(0 <= m <= 1 for m in v),
                      "mu values must lie in [0, 1]"),
    "sweep.h_list": (_float_list, (1.0, 10.0, 100.0, 1000.0),
                     lambda v: all(h > 0 for h in v) and all(b > a for a, b in zip(v, v[1:])),
                     "sweep.h_list must be positive and strictly increasing"),
    "sweep.eps_list": (_float_list, (0.1, 0.05, 0.025, 0.0125),
                       lambda v: all(e > 0 for e in v) and all(b < a for a, b in zip(v, v[1:])),
                       "sweep.eps_list must be positive and strictly decreasing"),
    "lab.rel_tol_h": (_float, 0.05, lambda v: 0 < v < 1, "lab.rel_tol_h must lie in (0, 1)"),
    "lab.tol_order": (_float, 1e-8, lambda v: v >= 0, "lab.tol_order must be >= 0"),
    "lab.lambda1": (_float, 1.0, lambda v: v > 0, "lab.lambda1 must be > 0"),
    "oracle.nx": (_int, 4, lambda v: 1 <= v <= 8, "oracle meshes are limited to 8x8"),
    "oracle.ny": (_int, 4, lambda v: 1 <= v <= 8, "oracle meshes are limited to 8x8"),
    "oracle.steps": (_int, 4, lambda v: v >= 1, "oracle.steps must be >= 1"),
    "oracle.q": (_float, 2.0, lambda v: v > 0, "the Tresca coefficient requires q > 0"),
    "oracle.eps_list": (_float_list, (1e-2, 5e-3, 2.5e-3),
                        lambda v: all(e > 0 for e in v) and all(b < a for a, b in zip(v, v[1:])),
                        "oracle.eps_list must be positive and strictly decreasing"),
    "gradcheck.n_coords": (_int, 5, lambda v: v >= 1, "gradcheck.n_coords must be >= 1"),
    "gradcheck.delta": (_float, 1e-5, lambda v: v > 0, "gradcheck.delta must be > 0"),
    "output.dir": (_str, "out", None, ""),
    "seed": (_int, 0, None, ""),
    "workers": (_int, 1, lambda v: v >= 1, "workers must be >= 1"),
}

KEYS = tuple(_SCHEMA)


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def with_overrides(self, pairs):
        vals = dict(self.values)
        for lineno, (key, raw) in enumerate(pairs, 1):
            vals[key] = _parse_value(key, raw, f"--set #{lineno}")
        cfg = RunConfig(vals)
        _check_cross(cfg)
        return cfg

    def echo(self):
        """Canonical one-line rendering (sorted keys, output location omitted)."""
        return "; ".join(
            f"{k}={_render(self.values[k])}" for k in sorted(self.values) if k != "output.dir"
        )

    def to_text(self):
        return "".join(f"{k} = {_render(self.values[k])}\n" for k in KEYS)

    def problem_data(self):
        from .assembly import ProblemData

        v = self.values
        return ProblemData(
            g=v["data.g"], b=v["data.b"], u_b=v["data.u_b"], q=v["data.q"], T=v["time.T"],
            n_steps=v["time.steps"], M_reg=v["cost.M"], eps=v["solver.eps"],
            tol_newton=v["solver.tol_newton"], max_newton_iters=v["solver.max_newton_iters"],
        )


def _render(v):
    if isinstance(v, tuple) and len(v) == 2 and v[0] in ("const", "bump"):
        return profile_text(v)
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(key, raw, where):
    if key not in _SCHEMA:
        raise ConfigError(f"{where}: unknown key {key!r}")
    parser, _, check, msg = _SCHEMA[key]
    try:
        value = parser(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: malformed value for {key!r}: {exc}") from None
    if check is not None and not check(value):
        raise ConfigError(f"{where}: invalid {key!r} = {raw.strip()!r}: {msg}")
    return value


def defaults():
    return RunConfig({k: entry[1] for k, entry in _SCHEMA.items()})


def parse_config(text):
    """Parse config text; omitted keys take their defaults."""
    vals = dict(defaults().values)
    seen = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first on line {seen[key]})")
        seen[key] = lineno
        vals[key] = _parse_value(key, raw, f"line {lineno}")
    cfg = RunConfig(vals)
    _check_cross(cfg)
    return cfg


def _check_cross(cfg):
    # compatibility u_b = b on Gamma1: only constant u_b needs checking
    # (bump vanishes on the boundary, so it pairs with b = 0)
    ub, b = cfg["data.u_b"], cfg["data.b"]
    ub_trace = ub[1] if ub[0] == "const" else 0.0
    if ub_trace != b[1]:
        raise ConfigError("data.u_b must equal data.b on Gamma1 (compatibility condition)")
