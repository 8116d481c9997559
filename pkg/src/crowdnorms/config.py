"""Flat ``key = value`` configuration files.

One setting per line, ``#`` starts a comment.  Keys mirror the fields of
``MarketParams``, ``SocialNorm`` and ``SimConfig``; command-line flags
override values read from a file.

    # compliant run at the default market
    p = 5
    c = 1
    alpha = 0.1
    K = 1
    h = 1
    periods = 100000
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Mapping

from .model import MarketParams, SocialNorm
from .simulate import ConfigError, SimConfig


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass  # allow "3.0" and "1e4", exact only up to 2**53
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _str(text: str) -> str:
    return text


KEYS: dict[str, Callable[[str], Any]] = {
    "p": float,
    "c": float,
    "r": float,
    "V": float,
    "delta": float,
    "alpha": float,
    "lambda": float,
    "K": _int,
    "h": _int,
    "K_req": _int,
    "h_req": _int,
    "K_max": _int,
    "n_workers": _int,
    "n_requesters": _int,
    "periods": _int,
    "burn_in": _int,
    "seed": _int,
    "delta_req": float,
    "worker_policy": _str,
    "requester_mode": _str,
    "requester_policy": _str,
    "initial_reputation": _int,
}

PARAM_KEYS = {"p": "p", "c": "c", "V": "V", "delta": "delta", "alpha": "alpha", "lambda": "lam"}


def parse_config(text: str, source: str = "<config>") -> dict[str, Any]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        where = f"{source}:{lineno}"
        if not sep or not key:
            raise ConfigError(where, "expected 'key = value'")
        if key not in KEYS:
            raise ConfigError(key, f"unknown key at {where}")
        if key in values:
            raise ConfigError(key, f"duplicate key at {where}")
        try:
            values[key] = KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(key, f"{exc} at {where}") from None
    return values


def load_config(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def dump_config(values: Mapping[str, Any]) -> str:
    for key in values:
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
    return "".join(f"{k} = {values[k]}\n" for k in sorted(values))


def merge(file_values: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """File values with every non-None override applied on top."""
    out = dict(file_values)
    out.update({k: v for k, v in overrides.items() if v is not None})
    return out


def market_params(values: Mapping[str, Any], **defaults) -> MarketParams:
    """MarketParams from config values; ``r`` sets ``c = r p`` and excludes ``c``."""
    kw = dict(defaults)
    kw.update({PARAM_KEYS[k]: v for k, v in values.items() if k in PARAM_KEYS})
    if values.get("r") is not None:
        if "c" in values:
            raise ConfigError("r", "give either r or c, not both")
        kw["c"] = values["r"] * kw.get("p", MarketParams.p)
    try:
        return MarketParams(**kw)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from None


def norm_from(values: Mapping[str, Any], k_key: str = "K", h_key: str = "h", required: bool = True) -> SocialNorm | None:
    if k_key not in values and h_key not in values and not required:
        return None
    missing = [k for k in (k_key, h_key) if k not in values]
    if missing:
        raise ConfigError(missing[0], "required")
    try:
        return SocialNorm(values[k_key], values[h_key])
    except ValueError as exc:
        raise ConfigError(f"{k_key},{h_key}", str(exc)) from None


def sim_config(values: Mapping[str, Any], **defaults) -> SimConfig:
    """Build a SimConfig; the requester norm is read from ``K_req``/``h_req``."""
    kw = dict(defaults)
    for key in ("n_workers", "n_requesters", "periods", "burn_in", "seed", "delta_req",
                "worker_policy", "requester_mode", "requester_policy", "initial_reputation"):
        if key in values:
            kw[key] = values[key]
    return SimConfig(
        params=market_params(values),
        worker_norm=norm_from(values, required=False),
        requester_norm=norm_from(values, "K_req", "h_req", required=False),
        **kw,
    )
