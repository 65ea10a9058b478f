"""Collects acceptance outcomes so the terminal summary can print one line per criterion."""

from collections import OrderedDict

RESULTS = OrderedDict()


def record(criterion, part, ok, detail=""):
    RESULTS.setdefault(criterion, []).append((part, bool(ok), detail))
    return ok


def summary_lines():
    lines = []
    for crit in sorted(RESULTS):
        parts = RESULTS[crit]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        info = "; ".join(f"{p}: {'ok' if ok else 'FAILED'}{' ' + d if d else ''}" for p, ok, d in parts)
        lines.append(f"criterion {crit:>2} {status}  {info}")
    return lines
