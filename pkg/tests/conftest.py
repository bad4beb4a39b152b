import numpy as np
import pytest

from ridgekit.minutiae import Minutia, MinutiaList


def stripes(period, ridge_angle, shape=(256, 256), amplitude=0.3, phase=0.0):
    """Dark-ridge sinusoid whose ridges run along ``ridge_angle`` (image frame, y down)."""
    h, w = shape
    y, x = np.mgrid[0:h, 0:w].astype(float)
    nx, ny = -np.sin(ridge_angle), np.cos(ridge_angle)
    return 0.5 - amplitude * np.cos(2 * np.pi * (x * nx + y * ny) / period + phase)


def constellation(rng, count, size=300.0, spacing=8.0, integer=True):
    """Random minutiae at least ``spacing`` apart."""
    pts = []
    while len(pts) < count:
        p = rng.uniform(0, size, 2)
        if integer:
            p = np.round(p)
        if all(np.hypot(*(p - q)) >= spacing for q in pts):
            pts.append(p)
    theta = rng.uniform(0, 2 * np.pi, count)
    kinds = rng.choice(["ending", "bifurcation"], count)
    return MinutiaList.from_minutiae(
        [Minutia(float(x), float(y), float(t), str(k)) for (x, y), t, k in zip(pts, theta, kinds)]
    )


def rigid(ml, alpha, dx=0.0, dy=0.0, cx=0.0, cy=0.0):
    """Rotate positions and directions by ``alpha`` about (cx, cy), then shift."""
    c, s = np.cos(alpha), np.sin(alpha)
    x = cx + c * (ml.x - cx) - s * (ml.y - cy) + dx
    y = cy + s * (ml.x - cx) + c * (ml.y - cy) + dy
    return MinutiaList(x, y, np.mod(ml.theta + alpha, 2 * np.pi), list(ml.kind), ml.image_id)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# --- acceptance summary -------------------------------------------------------

_RANK = {"PASS": 0, "SKIP": 1, "FAIL": 2}
_criteria: dict[int, tuple[str, list[str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or (rep.when == "setup" and rep.skipped)):
        return
    if hasattr(rep, "wasxfail"):
        status = "PASS" if rep.passed else "FAIL"
    elif rep.skipped:
        status = "SKIP"
    else:
        status = "PASS" if rep.passed else "FAIL"
    k = marker.args[0]
    old, notes = _criteria.get(k, ("PASS", []))
    detail = dict(item.user_properties).get("detail")
    if rep.skipped and not hasattr(rep, "wasxfail"):
        detail = detail or str(rep.longrepr[-1])
    if detail:
        notes.append(detail)
    _criteria[k] = (max(old, status, key=_RANK.get), notes)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        status, notes = _criteria[k]
        terminalreporter.write_line(f"criterion {k:2d}: {status}" + (f"  ({'; '.join(notes)})" if notes else ""))
