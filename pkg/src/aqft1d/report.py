"""JSON rendering of verification reports."""
import json
import math


def _clean(obj):
    # JSON has no nan/inf; they become null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(report):
    """Deterministic JSON text: fixed key order, no timing noise unless requested."""
    return json.dumps(_clean(report), indent=2, allow_nan=False) + "\n"


def write(report, path):
    text = dumps(report)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text


def summary_line(report):
    s = report["summary"]
    verdict = "PASS" if s["passed"] else "FAIL"
    return f"{verdict}: {s['pass']} passed, {s['fail']} failed, {s['error']} errors ({s['total']} checks)"
