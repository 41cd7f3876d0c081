"""Figure 4: only the v component quenches (q >= 1 > p); linear v rate."""

from __future__ import annotations

from .figure_nonsim import run


def main(argv: list[str] | None = None) -> int:
    return run(argv, "non-simultaneous rate (v quenches)")


if __name__ == "__main__":
    raise SystemExit(main())
