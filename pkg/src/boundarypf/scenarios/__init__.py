"""Experiment worlds: p-norm localization and source-term estimation."""

VARIANTS = ("tpf", "depf")


def check_variant(variant: str) -> str:
    v = variant.lower()
    if v not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return v
