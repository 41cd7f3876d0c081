"""Figure 3: only the u component quenches (p >= 1 > q); linear u rate."""

from __future__ import annotations

from .figure_nonsim import run


def main(argv: list[str] | None = None) -> int:
    return run(argv, "non-simultaneous rate (u quenches)")


if __name__ == "__main__":
    raise SystemExit(main())
