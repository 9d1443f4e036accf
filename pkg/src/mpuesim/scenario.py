"""Hexagonal site layout with wrap-around and straight-line UE mobility."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

SECTOR_AZIMUTHS_DEG = (0.0, 120.0, 240.0)
KMH = 1000.0 / 3600.0


@dataclass(frozen=True)
class NetworkLayout:
    """Sites, sector cells and the wrap-around image translations.

    ``wrap_images[0]`` is the zero vector; the remaining six translate the
    whole cluster onto its neighbouring replicas.
    """

    site_positions: np.ndarray  # (n_sites, 2) m
    cells: tuple[tuple[int, float], ...]  # (site id, sector azimuth deg)
    inter_site_distance: float
    wrap_images: np.ndarray  # (7, 2) m
    bs_height: float = 10.0
    ue_height: float = 1.5

    @property
    def n_sites(self) -> int:
        return len(self.site_positions)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def cell_site(self) -> np.ndarray:
        return np.array([s for s, _ in self.cells], dtype=int)

    @property
    def cell_azimuth(self) -> np.ndarray:
        return np.array([a for _, a in self.cells], dtype=float)

    @property
    def hex_radius(self) -> float:
        """Circumradius of one site's hexagonal footprint."""
        return self.inter_site_distance / math.sqrt(3.0)

    def to_dict(self) -> dict:
        return {
            "inter_site_distance": self.inter_site_distance,
            "bs_height": self.bs_height,
            "ue_height": self.ue_height,
            "site_positions": self.site_positions.tolist(),
            "cells": [list(c) for c in self.cells],
            "wrap_images": self.wrap_images.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> NetworkLayout:
        return cls(
            site_positions=np.asarray(data["site_positions"], dtype=float),
            cells=tuple((int(s), float(a)) for s, a in data["cells"]),
            inter_site_distance=float(data["inter_site_distance"]),
            wrap_images=np.asarray(data["wrap_images"], dtype=float),
            bs_height=float(data["bs_height"]),
            ue_height=float(data["ue_height"]),
        )


@dataclass(frozen=True)
class UeKinematics:
    position: tuple[float, float]
    speed: float
    heading: float  # radians
    height: float = 1.5


def _hex_ring(n_rings: int) -> list[tuple[float, float]]:
    """Unit-spacing lattice points of a hexagon with ``n_rings`` rings."""
    a1 = np.array([1.0, 0.0])
    a2 = np.array([0.5, math.sqrt(3.0) / 2.0])
    pts = [(0.0, 0.0)]
    directions = [a2 - a1, -a1, -a2, a1 - a2, a1, a2]
    for k in range(1, n_rings + 1):
        p = k * a1
        for d in directions:
            for _ in range(k):
                pts.append((float(p[0]), float(p[1])))
                p = p + d
    return pts


def build_layout(
    inter_site_distance: float = 200.0,
    n_rings: int = 1,
    bs_height: float = 10.0,
    ue_height: float = 1.5,
) -> NetworkLayout:
    """Build a hexagonal cluster of ``1 + 3 n (n + 1)`` three-sector sites.

    The cluster tiles the plane with translation ``D ((n+1) a1 + n a2)`` and
    its 60 degree rotations, which are the six wrap-around images.
    """
    if inter_site_distance <= 0:
        raise ValueError("inter_site_distance must be positive")
    if n_rings < 0:
        raise ValueError("n_rings must be non-negative")
    sites = np.array(_hex_ring(n_rings)) * inter_site_distance
    cells = tuple((s, az) for s in range(len(sites)) for az in SECTOR_AZIMUTHS_DEG)

    base = inter_site_distance * (
        (n_rings + 1) * np.array([1.0, 0.0])
        + n_rings * np.array([0.5, math.sqrt(3.0) / 2.0])
    )
    images = [np.zeros(2)]
    for k in range(6):
        ang = k * math.pi / 3.0
        rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
        images.append(rot @ base)
    return NetworkLayout(
        site_positions=sites,
        cells=cells,
        inter_site_distance=float(inter_site_distance),
        wrap_images=np.array(images),
        bs_height=bs_height,
        ue_height=ue_height,
    )


def wrap_positions(layout: NetworkLayout, xy: np.ndarray) -> np.ndarray:
    """Map points back into the cluster footprint (torus re-entry).

    A point belongs to the site (or site replica) nearest to it; a point closest
    to a replica is shifted by that replica's translation.
    """
    xy = np.asarray(xy, dtype=float)
    flat = xy.reshape(-1, 2)
    # candidate site replicas: (7 images, n_sites, 2)
    cand = layout.site_positions[None, :, :] + layout.wrap_images[:, None, :]
    d2 = ((flat[:, None, None, :] - cand[None]) ** 2).sum(-1)
    d2 = d2.reshape(len(flat), -1)
    img = np.argmin(d2, axis=1) // layout.n_sites
    return (flat - layout.wrap_images[img]).reshape(xy.shape)


def in_region(layout: NetworkLayout, xy: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """True where the point lies in the (non-replica) cluster footprint."""
    xy = np.asarray(xy, dtype=float)
    return np.all(np.abs(wrap_positions(layout, xy) - xy) <= tol, axis=-1)


def _sample_hexagon(rng: np.random.Generator, n: int, apothem: float) -> np.ndarray:
    """Uniform points in a pointy-top hexagon centred at the origin."""
    radius = 2.0 * apothem / math.sqrt(3.0)
    out = np.empty((0, 2))
    while len(out) < n:
        m = 2 * (n - len(out)) + 8
        p = rng.uniform([-apothem, -radius], [apothem, radius], size=(m, 2))
        keep = np.abs(p[:, 1]) <= radius - np.abs(p[:, 0]) / math.sqrt(3.0)
        out = np.vstack([out, p[keep]])
    return out[:n]


def drop_ues(
    layout: NetworkLayout,
    n_ue: int,
    rng: np.random.Generator,
    speed: float = 60.0 * KMH,
) -> list[UeKinematics]:
    """Drop UEs uniformly over the cluster with uniform random headings."""
    if n_ue <= 0:
        raise ValueError("n_ue must be positive")
    site = rng.integers(0, layout.n_sites, size=n_ue)
    offset = _sample_hexagon(rng, n_ue, layout.inter_site_distance / 2.0)
    pos = layout.site_positions[site] + offset
    heading = rng.uniform(0.0, 2.0 * math.pi, size=n_ue)
    return [
        UeKinematics((float(p[0]), float(p[1])), float(speed), float(h), layout.ue_height)
        for p, h in zip(pos, heading)
    ]


def step_mobility(ue: UeKinematics, dt: float, layout: NetworkLayout) -> UeKinematics:
    """Advance one UE by ``dt`` seconds along its heading, with torus re-entry."""
    if dt == 0:
        return ue
    if dt < 0:
        raise ValueError("dt must be non-negative")
    x = ue.position[0] + ue.speed * dt * math.cos(ue.heading)
    y = ue.position[1] + ue.speed * dt * math.sin(ue.heading)
    w = wrap_positions(layout, np.array([x, y]))
    return UeKinematics((float(w[0]), float(w[1])), ue.speed, ue.heading, ue.height)


def step_positions(
    layout: NetworkLayout, xy: np.ndarray, speed: np.ndarray, heading: np.ndarray, dt: float
) -> np.ndarray:
    """Vectorised :func:`step_mobility` for arrays of UEs."""
    v = np.stack([np.cos(heading), np.sin(heading)], axis=-1) * (np.asarray(speed) * dt)[..., None]
    return wrap_positions(layout, xy + v)


def nearest_images(layout: NetworkLayout, ue_xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vector from each UE to the nearest replica of each site.

    Returns ``(offsets, image_index)`` with shapes ``(n_ue, n_sites, 2)`` and
    ``(n_ue, n_sites)``; ``offsets`` points from the site replica to the UE.
    """
    ue_xy = np.atleast_2d(ue_xy)
    cand = layout.site_positions[None, :, :] + layout.wrap_images[:, None, :]  # (7, S, 2)
    diff = ue_xy[:, None, None, :] - cand[None]  # (U, 7, S, 2)
    d2 = (diff**2).sum(-1)
    img = np.argmin(d2, axis=1)  # (U, S)
    offs = np.take_along_axis(diff, img[:, None, :, None], axis=1)[:, 0]
    return offs, img


def effective_distance(
    ue_pos, site_pos, layout: NetworkLayout
) -> tuple[float, int]:
    """Minimum 3D distance from a UE to any wrap image of a site."""
    ue = np.asarray(ue_pos, dtype=float)
    site = np.asarray(site_pos, dtype=float)
    d2d = np.linalg.norm(ue[None, :] - (site[None, :] + layout.wrap_images), axis=1)
    idx = int(np.argmin(d2d))
    dh = layout.bs_height - layout.ue_height
    return float(math.hypot(d2d[idx], dh)), idx


def snapshot(layout: NetworkLayout, ues: list[UeKinematics]) -> str:
    """Serialise a layout and UE drop to JSON text."""
    return json.dumps(
        {
            "layout": layout.to_dict(),
            "ues": [
                {"position": list(u.position), "speed": u.speed, "heading": u.heading, "height": u.height}
                for u in ues
            ],
        },
        indent=1,
    )


def load_snapshot(text: str) -> tuple[NetworkLayout, list[UeKinematics]]:
    data = json.loads(text)
    layout = NetworkLayout.from_dict(data["layout"])
    ues = [
        UeKinematics(tuple(u["position"]), u["speed"], u["heading"], u["height"])
        for u in data["ues"]
    ]
    return layout, ues
