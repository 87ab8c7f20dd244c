"""Textual formats: family spec strings, experiment configs, dataset files.

A family spec is a compact string like ``ar1{rho=0.6,n=200}`` or
``negbinomial{mu=12.0,k=7.0}``; an experiment config is a key = value file
with one entry per line and ``#`` comments. Both are strict: unknown
families, unknown keys, missing required entries, and malformed numbers all
raise ValueError with a message naming the offending piece.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

from .marginals import _FAMILIES
from .model import CopulaModel, ParamVector

__all__ = [
    "ExperimentConfig",
    "parse_model_specs",
    "format_correlation_spec",
    "format_marginal_spec",
    "parse_config_text",
    "read_config",
    "config_hash",
    "read_dataset",
    "write_dataset",
]

_SPEC_RE = re.compile(r"^\s*([a-z][a-z0-9]*)\s*\{([^{}]*)\}\s*$")


def _parse_spec(text: str) -> tuple[str, dict[str, str]]:
    m = _SPEC_RE.match(text)
    if m is None:
        raise ValueError(f"malformed family spec {text!r}")
    family = m.group(1)
    body = m.group(2).strip()
    fields: dict[str, str] = {}
    if body:
        for part in body.split(","):
            if "=" not in part:
                raise ValueError(f"malformed field {part!r} in spec {text!r}")
            key, _, value = part.partition("=")
            key = key.strip()
            if key in fields:
                raise ValueError(f"duplicate field {key!r} in spec {text!r}")
            fields[key] = value.strip()
    return family, fields


def _take(fields: dict[str, str], spec: str, key: str, kind) -> float | int:
    if key not in fields:
        raise ValueError(f"spec {spec!r} is missing {key!r}")
    raw = fields.pop(key)
    try:
        value = kind(raw)
    except ValueError:
        raise ValueError(f"field {key}={raw!r} in spec {spec!r} is not a number") from None
    return value


def parse_model_specs(corr_text: str, marg_text: str) -> tuple[CopulaModel, ParamVector]:
    """Build a model and its natural-scale parameters from two spec strings.

    The correlation spec carries the dimension (``n`` for ar1/identity,
    ``block`` and ``groups`` for exch); the marginal spec carries the
    marginal parameters by name.
    """
    cfam, cf = _parse_spec(corr_text)
    if cfam == "ar1":
        rho = _take(cf, corr_text, "rho", float)
        n = _take(cf, corr_text, "n", int)
        model_args = dict(correlation_family="ar1", n=n, block_sizes=None)
        corr_values = (rho,)
    elif cfam == "exch":
        omega = _take(cf, corr_text, "omega", float)
        block = _take(cf, corr_text, "block", int)
        groups = _take(cf, corr_text, "groups", int)
        if block < 1 or groups < 1:
            raise ValueError(f"spec {corr_text!r} needs positive block and groups")
        model_args = dict(
            correlation_family="exch",
            n=block * groups,
            block_sizes=(block,) * groups,
        )
        corr_values = (omega,)
    elif cfam == "identity":
        n = _take(cf, corr_text, "n", int)
        model_args = dict(correlation_family="identity", n=n, block_sizes=None)
        corr_values = ()
    else:
        raise ValueError(f"unknown correlation family {cfam!r}")
    if cf:
        raise ValueError(f"unexpected fields {sorted(cf)} in spec {corr_text!r}")

    mfam, mf = _parse_spec(marg_text)
    if mfam not in _FAMILIES:
        raise ValueError(f"unknown marginal family {mfam!r}")
    marg_values = tuple(
        _take(mf, marg_text, name, float) for name in _FAMILIES[mfam].param_names
    )
    if mf:
        raise ValueError(f"unexpected fields {sorted(mf)} in spec {marg_text!r}")

    model = CopulaModel(marginal_family=mfam, **model_args)
    return model, model.pack(corr_values, marg_values)


def format_correlation_spec(model: CopulaModel, theta: ParamVector) -> str:
    """Inverse of the correlation half of parse_model_specs."""
    corr_values, _ = model.split(theta)
    fam = model.correlation_family
    if fam == "ar1":
        return f"ar1{{rho={corr_values[0]!r},n={model.n}}}"
    if fam == "exch":
        sizes = set(model.block_sizes)
        if len(sizes) != 1:
            raise ValueError("only equal block sizes have a spec form")
        block = model.block_sizes[0]
        return f"exch{{omega={corr_values[0]!r},block={block},groups={len(model.block_sizes)}}}"
    return f"identity{{n={model.n}}}"


def format_marginal_spec(model: CopulaModel, theta: ParamVector) -> str:
    """Inverse of the marginal half of parse_model_specs."""
    _, marg_values = model.split(theta)
    names = _FAMILIES[model.marginal_family].param_names
    body = ",".join(f"{k}={v!r}" for k, v in zip(names, marg_values))
    return f"{model.marginal_family}{{{body}}}"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a model, true parameters, and run sizes.

    The seed is mandatory; nothing in the package ever seeds itself from
    the clock.
    """

    model: CopulaModel
    theta0: ParamVector
    seed: int
    replicates: int = 200
    jitters: int = 1000
    bootstrap: int = 2000
    parallelism: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        for field in ("replicates", "jitters", "bootstrap", "parallelism"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be at least 1")


_CONFIG_KEYS = {
    "correlation",
    "marginal",
    "seed",
    "replicates",
    "jitters",
    "bootstrap",
    "parallelism",
    "out",
}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse a key = value config; see ExperimentConfig for the fields."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno} is not key = value: {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r} on line {lineno}")
        if key in entries:
            raise ValueError(f"duplicate config key {key!r} on line {lineno}")
        entries[key] = value.strip()
    for required in ("correlation", "marginal", "seed"):
        if required not in entries:
            raise ValueError(f"config is missing the {required!r} entry")
    model, theta0 = parse_model_specs(entries["correlation"], entries["marginal"])
    kwargs = {}
    for key in ("seed", "replicates", "jitters", "bootstrap", "parallelism"):
        if key in entries:
            try:
                kwargs[key] = int(entries[key])
            except ValueError:
                raise ValueError(f"config key {key!r} must be an integer") from None
    if "out" in entries:
        kwargs["out"] = entries["out"]
    return ExperimentConfig(model=model, theta0=theta0, **kwargs)


def read_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def config_hash(cfg: ExperimentConfig) -> str:
    """Short stable digest of the resolved configuration."""
    lines = [
        f"correlation={format_correlation_spec(cfg.model, cfg.theta0)}",
        f"marginal={format_marginal_spec(cfg.model, cfg.theta0)}",
        f"seed={cfg.seed}",
        f"replicates={cfg.replicates}",
        f"jitters={cfg.jitters}",
        f"bootstrap={cfg.bootstrap}",
    ]
    digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
    return digest[:12]


def read_dataset(path: str) -> np.ndarray:
    """Read a single-column CSV of counts with header ``y``."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != "y":
        raise ValueError(f"{path} is not a dataset file (expected header 'y')")
    try:
        values = [int(ln) for ln in lines[1:]]
    except ValueError:
        raise ValueError(f"{path} contains a non-integer value") from None
    if not values:
        raise ValueError(f"{path} has no observations")
    return np.array(values, dtype=np.int64)


def write_dataset(path: str, y: np.ndarray, comments=()) -> None:
    """Write counts as a single-column CSV with header ``y``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write("y\n")
        for v in np.asarray(y).ravel():
            fh.write(f"{int(v)}\n")
