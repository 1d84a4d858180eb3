"""Kernel selection: compiled extension when built, pure Python otherwise."""

from __future__ import annotations

from dialrel.agreement import _kernel_py

try:
    from dialrel.agreement import _kernel_c
except ImportError:  # extension not built; the pure kernel is always available
    _kernel_c = None

HAVE_COMPILED = _kernel_c is not None


def get_kernel(name: str = "auto"):
    if name == "auto":
        return _kernel_c if _kernel_c is not None else _kernel_py
    if name == "compiled":
        if _kernel_c is None:
            raise RuntimeError("the compiled agreement kernel is not built")
        return _kernel_c
    if name == "python":
        return _kernel_py
    raise ValueError(f"unknown backend {name!r} (expected auto/compiled/python)")


def available_backends() -> tuple[str, ...]:
    return ("python", "compiled") if HAVE_COMPILED else ("python",)
