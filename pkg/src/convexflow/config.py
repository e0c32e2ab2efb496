"""Run configuration: a JSON document checked against a fixed schema.

Unknown keys are rejected at every level so typos never silently fall back
to defaults.
"""
import copy
import hashlib
import json

from .errors import ConvexFlowError


class ConfigError(ConvexFlowError):
    pass


_NUM = (int, float)
_LIST = (list,)
_OPT_NUM = (int, float, type(None))
_STR = (str,)

SCHEMA = {
    "out": (_STR + (type(None),), None),
    "threads": ((int,), 1),
    "tol": (_NUM, 1e-7),
    "threshold": (_NUM, 1e-14),
    "seed": ((int,), 0),
    "K_a": ((int, type(None)), None),
    "grid": {"norm_oversample": ((int,), 4), "max_grid": ((int,), 257)},
    "params": {"lam": ((int,), 40), "sigma": (_STR + _NUM, "1/8"), "r": ((int,), 2),
               "mu": (_NUM, 64.0), "beta": (_NUM, 15.0), "theta": (_NUM, 1.25),
               "nu": (_NUM, 1.0)},
    "times": (_LIST, [0.0, 0.2, 0.4, 0.6, 0.9]),
    "bootstrap": {"height": (_NUM, 0.02), "t0": (_NUM, 0.25), "t1": (_NUM, 0.75),
                  "power": ((int,), 4)},
    "iterate": {"n_steps": ((int,), 1), "eps": (_OPT_NUM, None)},
    "kernels": {"fejer_r": (_LIST, [2, 4, 8, 16]), "dirichlet_N": (_LIST, [4, 8, 16, 32, 64])},
    "geometry": {"samples": ((int,), 1000), "estimate_samples": ((int,), 2000)},
    "feasibility": {"beta": (_NUM, 15.0), "plan_lam": (_LIST, [10000, 1000000, 100000000])},
}


def _defaults(schema):
    out = {}
    for k, v in schema.items():
        out[k] = _defaults(v) if isinstance(v, dict) else copy.deepcopy(v[1])
    return out


def _merge(schema, base, doc, path):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    for k, v in doc.items():
        where = f"{path}.{k}" if path else k
        if k not in schema:
            raise ConfigError(f"unknown key {where!r}")
        spec = schema[k]
        if isinstance(spec, dict):
            _merge(spec, base[k], v, where)
            continue
        types = spec[0]
        if isinstance(v, bool) or not isinstance(v, types):
            names = "/".join(t.__name__ for t in types)
            raise ConfigError(f"{where} must be {names}, got {type(v).__name__}")
        base[k] = v


def schema_help():
    """Human-readable listing of keys, types and defaults."""
    lines = []

    def walk(schema, prefix):
        for k, v in schema.items():
            if isinstance(v, dict):
                walk(v, f"{prefix}{k}.")
            else:
                names = "/".join("null" if t is type(None) else t.__name__ for t in v[0])
                lines.append(f"  {prefix}{k}: {names} (default {json.dumps(v[1])})")
    walk(SCHEMA, "")
    return "config keys:\n" + "\n".join(lines)


class RunConfig:
    """Validated configuration with defaults filled in."""

    def __init__(self, doc=None):
        self.data = _defaults(SCHEMA)
        if doc:
            _merge(SCHEMA, self.data, doc, "")
        if self.data["threads"] < 1:
            raise ConfigError("threads must be >= 1")
        t = self.data["times"]
        if not t or any(not isinstance(x, _NUM) for x in t) or any(
                b <= a for a, b in zip(t, t[1:])):
            raise ConfigError("times must be a strictly increasing list of numbers")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls(doc)

    def __getitem__(self, key):
        return self.data[key]

    def canonical(self):
        """Canonical JSON without the execution-only keys (threads, out)."""
        d = {k: v for k, v in self.data.items() if k not in ("threads", "out")}
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def param_set(self):
        from fractions import Fraction

        from .params import ParamSet
        p = dict(self.data["params"])
        p["sigma"] = Fraction(str(p["sigma"]))
        return ParamSet(**p)
