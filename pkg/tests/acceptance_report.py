"""Collects one verdict line per acceptance criterion for the terminal summary."""

RESULTS: dict[str, str] = {}


def record(criterion: str, passed: bool, detail: str = "", soft: bool = False) -> bool:
    verdict = ("PASS" if passed else "FAIL") + (" (soft)" if soft else "")
    line = f"{criterion} {verdict}  {detail}".rstrip()
    RESULTS[criterion] = line
    print(line)
    return passed
