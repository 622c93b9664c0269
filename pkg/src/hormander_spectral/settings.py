"""
Environment-backed settings.

Every setting is read at call time, so changing the environment
(for example with `monkeypatch.setenv` in tests) takes effect immediately.
See `docs/reference/settings.md` for what each one controls.
"""

from __future__ import annotations

from environs import Env


__all__ = [
    "condition_limit",
    "identity_tolerance",
    "log_level",
    "margin_tolerance",
    "rank_tolerance",
    "stability_tolerance",
    "workers",
]

env = Env()


def rank_tolerance() -> float:
    return env.float("HORMANDER_RANK_TOLERANCE", 1e-9)


def margin_tolerance() -> float:
    return env.float("HORMANDER_MARGIN_TOLERANCE", 1e-9)


def identity_tolerance() -> float:
    return env.float("HORMANDER_IDENTITY_TOLERANCE", 1e-10)


def stability_tolerance() -> float:
    return env.float("HORMANDER_STABILITY_TOLERANCE", 0.1)


def condition_limit() -> float:
    return env.float("HORMANDER_CONDITION_LIMIT", 1e12)


def workers() -> int:
    return env.int("HORMANDER_WORKERS", 1)


def log_level() -> str:
    return env.str("HORMANDER_LOG_LEVEL", "WARNING")
