"""Layered INI configuration: built-in defaults, then files, then ``--set`` overrides.

Keys are addressed as ``section.key``.  Values are kept as strings and
converted on access; lists use the ``[a, b]`` form, e.g. ``f = [2, 1]``.
"""
import ast
import configparser
import math

import numpy as np

from .errors import InputError
from .field import REGIME_C, REGIME_EPS, FieldConfig, field_invariants

DEFAULTS = {
    "field": {"f": "[1.0]", "q": "0", "F": ""},
    "scale": {"h": "0.1", "mu": "1.0"},
    "potential": {"expr": "0", "L": "1.0", "smoothness": "[inf, 0]"},
    "weyl": {"norm": "physical"},
    "psi": {"radius": "0.5", "amplitude": "1.0"},
    "thresholds": {"C": repr(REGIME_C), "eps": repr(REGIME_EPS), "eps0": "0.05"},
    "grid": {"n": "48", "order": "2", "boundary": "torus"},
    "engine": {"name": "auto", "dense_cap": "6000", "kpm_moments": "256", "kpm_vectors": "32", "seed": "0"},
    "output": {"dir": "."},
}


class ConfigError(InputError):
    pass


class Config:
    def __init__(self):
        self._cp = configparser.ConfigParser(interpolation=None)
        self._cp.optionxform = str   # keep case (F vs f)
        self._cp.read_dict(DEFAULTS)
        self.sources = ["defaults"]

    @classmethod
    def load(cls, paths=(), overrides=()):
        cfg = cls()
        for p in paths or ():
            if not cfg._cp.read(p):
                raise ConfigError(f"cannot read config file {p}")
            cfg.sources.append(str(p))
        for item in overrides or ():
            cfg.set_item(item)
        return cfg

    def set_item(self, item):
        """Apply one ``section.key=value`` override."""
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        lhs, value = item.split("=", 1)
        if "." not in lhs:
            raise ConfigError(f"override key must be section.key, got {lhs!r}")
        sec, key = lhs.strip().split(".", 1)
        if not self._cp.has_section(sec):
            self._cp.add_section(sec)
        self._cp.set(sec, key.strip(), value.strip())
        self.sources.append(f"--set {lhs.strip()}")

    def raw(self, sec, key, default=None):
        return self._cp.get(sec, key, fallback=default)

    def get_float(self, sec, key):
        return float(self.raw(sec, key))

    def get_int(self, sec, key):
        return int(self.raw(sec, key))

    def get_list(self, sec, key):
        text = self.raw(sec, key, "")
        if not text:
            return None
        return _literal(text)

    def field(self):
        F = self.raw("field", "F", "")
        if F:
            return field_invariants(np.asarray(_literal(F), dtype=float))
        return FieldConfig.from_frequencies(self.get_list("field", "f"), self.get_int("field", "q"))

    def as_dict(self):
        return {s: dict(self._cp.items(s)) for s in self._cp.sections()}


def _literal(text):
    text = text.strip()
    try:
        return ast.literal_eval(text.replace("inf", "1e999"))
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"cannot parse value {text!r}") from exc


def smoothness_pair(value):
    l, s = value
    return (math.inf if l >= 1e308 else float(l), float(s))
