"""Synthetic fingerprint-like patterns with known ridge geometry.

Ridges are rendered as ``0.5 - A cos(psi)`` with a phase field ``psi`` made
of a planar (optionally gently warped) carrier plus one spiral phase term per
planned minutia.  Dark ridges sit at ``psi = 0 (mod 2 pi)``.  A spiral of
polarity ``s`` adds one extra ridge on the ``-s * t`` side of the minutia
(``t`` the local ridge direction); choosing which phase meets the singular
point selects a ridge ending or a bifurcation.

Impressions of the same finger are rigid transforms of one pattern, rendered
analytically so ground truth stays exact.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import RidgekitError


class SynthSpecError(RidgekitError):
    pass


@dataclass(frozen=True)
class PlannedMinutia:
    x: float
    y: float
    kind: str  # "ending" | "bifurcation"
    polarity: int = 1


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    width: int = 256
    height: int = 256
    period: float = 8.0
    orientation: str = "uniform"  # "uniform" | "smooth"
    theta: float = math.pi / 2  # ridge direction for the uniform carrier
    warp: float = 0.2  # max relative phase-gradient perturbation for "smooth"
    minutiae: tuple[PlannedMinutia, ...] = ()
    noise: float = 0.02
    amplitude: float = 0.3
    footprint: str = "full"  # "full" | "ellipse"
    dx: float = 0.0
    dy: float = 0.0
    alpha: float = 0.0  # rotation in radians about the image centre
    d_min: float = 8.0

    @property
    def center(self) -> tuple[float, float]:
        return ((self.width - 1) / 2.0, (self.height - 1) / 2.0)


@dataclass
class GroundTruth:
    """Planned minutiae in image coordinates after the spec's transform."""

    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    kind: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.kind)


def _validate(spec: SynthSpec) -> None:
    if not 3.0 <= spec.period <= 25.0:
        raise SynthSpecError(f"period {spec.period} outside [3, 25] px")
    if spec.orientation not in ("uniform", "smooth"):
        raise SynthSpecError(f"unknown orientation generator {spec.orientation!r}")
    if spec.footprint not in ("full", "ellipse"):
        raise SynthSpecError(f"unknown footprint {spec.footprint!r}")
    pts = np.array([[m.x, m.y] for m in spec.minutiae]).reshape(-1, 2)
    for m in spec.minutiae:
        if m.kind not in ("ending", "bifurcation") or m.polarity not in (1, -1):
            raise SynthSpecError(f"bad planned minutia {m}")
    if len(pts) > 1:
        d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
        np.fill_diagonal(d, np.inf)
        if d.min() < 2 * spec.d_min:
            raise SynthSpecError("planned minutiae closer than 2 * d_min")


class _Carrier:
    """Spiral-free phase field and its gradient, in finger coordinates."""

    def __init__(self, spec: SynthSpec):
        self.k0 = 2 * math.pi / spec.period
        normal = spec.theta + math.pi / 2
        self.nx, self.ny = math.cos(normal), math.sin(normal)
        self.terms: list[tuple[float, float, float, float]] = []
        if spec.orientation == "smooth":
            rng = np.random.default_rng([spec.seed, 7])
            n_terms = 3
            for _ in range(n_terms):
                wavelength = rng.uniform(150, 260)
                direction = rng.uniform(0, 2 * math.pi)
                wx = 2 * math.pi / wavelength * math.cos(direction)
                wy = 2 * math.pi / wavelength * math.sin(direction)
                # amplitude chosen so |grad| of each term <= warp * k0 / n_terms
                amp = spec.warp * self.k0 / n_terms / (2 * math.pi / wavelength)
                self.terms.append((amp, wx, wy, rng.uniform(0, 2 * math.pi)))

    def phase(self, x, y):
        p = self.k0 * (x * self.nx + y * self.ny)
        for amp, wx, wy, c in self.terms:
            p = p + amp * np.sin(wx * x + wy * y + c)
        return p

    def grad(self, x: float, y: float) -> tuple[float, float]:
        gx, gy = self.k0 * self.nx, self.k0 * self.ny
        for amp, wx, wy, c in self.terms:
            cs = amp * math.cos(wx * x + wy * y + c)
            gx += cs * wx
            gy += cs * wy
        return gx, gy


def _frames(carrier: _Carrier, pts: np.ndarray) -> list[tuple[float, float, float, float]]:
    """Local (normal, tangent) unit vectors at each point: (nx, ny, tx, ty)."""
    out = []
    for x, y in pts:
        gx, gy = carrier.grad(x, y)
        g = math.hypot(gx, gy)
        nx, ny = gx / g, gy / g
        out.append((nx, ny, -ny, nx))
    return out


def _spiral(x, y, m, frame, polarity):
    nx, ny, tx, ty = frame
    dx = x - m[0]
    dy = y - m[1]
    return polarity * np.arctan2(dx * tx + dy * ty, dx * nx + dy * ny)


def _place(spec: SynthSpec, carrier: _Carrier):
    """Nudge each planned minutia along its ridge normal so the singular
    point carries the requested kind.  Returns positions, frames, polarities."""
    pts = np.array([[m.x, m.y] for m in spec.minutiae], dtype=np.float64).reshape(-1, 2)
    pol = [m.polarity for m in spec.minutiae]
    for _ in range(8):
        frames = _frames(carrier, pts)
        moved = 0.0
        new = pts.copy()
        for i, m in enumerate(spec.minutiae):
            c = carrier.phase(pts[i, 0], pts[i, 1])
            for j in range(len(pts)):
                if j != i:
                    c += _spiral(pts[i, 0], pts[i, 1], pts[j], frames[j], pol[j])
            # the extra-ridge side lies at local angle -s*pi/2; a ridge ray
            # (psi = 0) pointing there is an ending, a valley ray a bifurcation
            target = math.pi / 2 if m.kind == "ending" else -math.pi / 2
            delta = math.remainder(target - c, 2 * math.pi)
            gx, gy = carrier.grad(pts[i, 0], pts[i, 1])
            step = delta / math.hypot(gx, gy)
            nx, ny, _, _ = frames[i]
            new[i] = pts[i] + step * np.array([nx, ny])
            moved = max(moved, abs(step))
        pts = new
        if moved < 1e-9:
            break
    return pts, _frames(carrier, pts), pol


def _finger_coords(spec: SynthSpec, x, y):
    """Map image pixel coordinates back into the untransformed finger frame."""
    cx, cy = spec.center
    u = x - cx - spec.dx
    v = y - cy - spec.dy
    ca, sa = math.cos(spec.alpha), math.sin(spec.alpha)
    return cx + ca * u + sa * v, cy - sa * u + ca * v


def _to_image(spec: SynthSpec, x, y):
    cx, cy = spec.center
    u = np.asarray(x) - cx
    v = np.asarray(y) - cy
    ca, sa = math.cos(spec.alpha), math.sin(spec.alpha)
    return cx + ca * u - sa * v + spec.dx, cy + sa * u + ca * v + spec.dy


def render_phase(spec: SynthSpec):
    _validate(spec)
    carrier = _Carrier(spec)
    pts, frames, pol = _place(spec, carrier)
    yy, xx = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    fx, fy = _finger_coords(spec, xx, yy)
    psi = carrier.phase(fx, fy)
    for i in range(len(pts)):
        psi = psi + _spiral(fx, fy, pts[i], frames[i], pol[i])

    thetas = []
    for i, m in enumerate(spec.minutiae):
        _, _, tx, ty = frames[i]
        sign = -pol[i] if m.kind == "ending" else pol[i]
        thetas.append(math.atan2(sign * ty, sign * tx) + spec.alpha)
    gx, gy = _to_image(spec, pts[:, 0], pts[:, 1])
    truth = GroundTruth(
        x=np.asarray(gx, dtype=np.float64).reshape(-1),
        y=np.asarray(gy, dtype=np.float64).reshape(-1),
        theta=np.mod(np.array(thetas, dtype=np.float64), 2 * math.pi),
        kind=[m.kind for m in spec.minutiae],
    )
    return psi, truth, (fx, fy)


def _footprint(spec: SynthSpec, fx, fy) -> np.ndarray:
    if spec.footprint == "full":
        return np.ones(fx.shape)
    cx, cy = spec.center
    ax, ay = 0.40 * spec.width, 0.46 * spec.height
    r = np.hypot((fx - cx) / ax, (fy - cy) / ay)
    # soft edge over a few pixels
    return np.clip((1.0 - r) * min(ax, ay) / 4.0, 0.0, 1.0)


def generate(spec: SynthSpec, noise_seed: int | None = None) -> tuple[np.ndarray, GroundTruth]:
    """Render ``spec`` to a [0, 1] image plus its ground-truth minutiae.

    ``noise_seed`` defaults to ``spec.seed``; output is deterministic in both.
    """
    psi, truth, (fx, fy) = render_phase(spec)
    weight = _footprint(spec, fx, fy)
    img = 0.5 - spec.amplitude * weight * np.cos(psi)
    if spec.noise > 0:
        rng = np.random.default_rng([spec.seed if noise_seed is None else noise_seed, 1])
        img = img + rng.normal(0.0, spec.noise, img.shape)
    return np.clip(img, 0.0, 1.0), truth


def impression(
    spec: SynthSpec,
    dx: float = 0.0,
    dy: float = 0.0,
    alpha: float = 0.0,
    noise_seed: int | None = None,
) -> tuple[np.ndarray, GroundTruth]:
    """Re-render ``spec`` under an extra rigid transform with fresh noise.

    Rotation is about the image centre and composes with the spec's own
    transform.
    """
    if abs(alpha) > math.radians(30) + 1e-12:
        raise SynthSpecError("impression rotation limited to 30 degrees")
    if abs(dx) > spec.width / 4 or abs(dy) > spec.height / 4:
        raise SynthSpecError("impression shift would move the pattern out of frame")
    cx, cy = spec.center
    ca, sa = math.cos(alpha), math.sin(alpha)
    # compose: new(p) = R_alpha (old(p) - c) + c + (dx, dy)
    ndx = ca * spec.dx - sa * spec.dy + dx
    ndy = sa * spec.dx + ca * spec.dy + dy
    moved = replace(spec, dx=ndx, dy=ndy, alpha=spec.alpha + alpha)
    return generate(moved, noise_seed=noise_seed)


def random_plan(
    rng: np.random.Generator,
    width: int,
    height: int,
    count: int,
    spacing: float,
    margin: float = 24.0,
    ellipse: bool = True,
    bifurcation_ratio: float = 0.5,
) -> tuple[PlannedMinutia, ...]:
    """Poisson-disc style random minutiae plan (rejection sampling)."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    pts: list[PlannedMinutia] = []
    attempts = 0
    while len(pts) < count and attempts < 20000:
        attempts += 1
        x = rng.uniform(margin, width - margin)
        y = rng.uniform(margin, height - margin)
        if ellipse:
            ax, ay = 0.40 * width - margin, 0.46 * height - margin
            if ((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2 > 1.0:
                continue
        if any(math.hypot(x - p.x, y - p.y) < spacing for p in pts):
            continue
        kind = "bifurcation" if rng.random() < bifurcation_ratio else "ending"
        pts.append(PlannedMinutia(x, y, kind, int(rng.choice([-1, 1]))))
    return tuple(pts)


def random_finger(
    seed: int,
    width: int = 256,
    height: int = 256,
    count: int = 24,
    spacing: float = 26.0,
    noise: float = 0.02,
) -> SynthSpec:
    """A smooth-orientation finger with an elliptical footprint and random minutiae."""
    rng = np.random.default_rng([seed, 3])
    period = float(rng.uniform(7.5, 10.0))
    return SynthSpec(
        seed=seed,
        width=width,
        height=height,
        period=period,
        orientation="smooth",
        theta=float(rng.uniform(0, math.pi)),
        minutiae=random_plan(rng, width, height, count, spacing),
        noise=noise,
        footprint="ellipse",
    )


def write_spec(spec: SynthSpec, path: str | os.PathLike) -> None:
    """Serialize ``spec`` as key=value text; minutiae as ``minutia=x,y,kind,polarity``."""
    lines = []
    for key in ("seed", "width", "height", "period", "orientation", "theta", "warp", "noise",
                "amplitude", "footprint", "dx", "dy", "alpha", "d_min"):
        lines.append(f"{key}={getattr(spec, key)!r}".replace("'", ""))
    for m in spec.minutiae:
        lines.append(f"minutia={m.x!r},{m.y!r},{m.kind},{m.polarity}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_spec(path: str | os.PathLike) -> SynthSpec:
    kwargs: dict = {}
    minutiae = []
    types = {f: type(getattr(SynthSpec(), f)) for f in SynthSpec.__dataclass_fields__ if f != "minutiae"}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise SynthSpecError(f"{path}:{lineno}: expected key=value")
            key = key.strip()
            value = value.strip()
            if key == "minutia":
                x, y, kind, pol = value.split(",")
                minutiae.append(PlannedMinutia(float(x), float(y), kind, int(pol)))
            elif key in types:
                kwargs[key] = types[key](value)
            else:
                raise SynthSpecError(f"{path}:{lineno}: unknown key {key!r}")
    return SynthSpec(minutiae=tuple(minutiae), **kwargs)


def truth_to_minutiae(truth: GroundTruth, image_id: str = ""):
    from .minutiae import Minutia, MinutiaList

    items = [
        Minutia(float(x), float(y), float(t % (2 * math.pi)), k)
        for x, y, t, k in zip(truth.x, truth.y, truth.theta, truth.kind)
    ]
    return MinutiaList.from_minutiae(items, image_id)


def dataset_transforms(seed: int, fingers: int, impressions: int, max_shift: float = 16.0,
                       max_rotation: float = math.radians(30)):
    """Per-impression ``(dx, dy, alpha)``; the first impression of each finger is untransformed."""
    rng = np.random.default_rng([seed, 5])
    plan = {}
    for f in range(fingers):
        for s in range(impressions):
            if s == 0:
                plan[(f, s)] = (0.0, 0.0, 0.0)
            else:
                dx, dy = rng.uniform(-max_shift, max_shift, 2)
                plan[(f, s)] = (float(dx), float(dy), float(rng.uniform(-max_rotation, max_rotation)))
    return plan


def synthetic_dataset(fingers: int = 20, impressions: int = 4, seed: int = 0, noise: float = 0.02,
                      width: int = 256, height: int = 256):
    """Yield ``(subject, sample, image, truth)`` for a rigid-impression dataset.

    Subjects are ``f000, f001, ...``; samples are numbered from 1.
    """
    transforms = dataset_transforms(seed, fingers, impressions)
    for f in range(fingers):
        spec = random_finger(seed * 100003 + f, width, height, noise=noise)
        for s in range(impressions):
            dx, dy, alpha = transforms[(f, s)]
            img, truth = impression(spec, dx, dy, alpha, noise_seed=spec.seed * 1009 + s)
            yield f"f{f:03d}", s + 1, img, truth
