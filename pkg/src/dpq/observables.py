"""Estimators on trajectory ensembles and the large sampling scans.

Site occupancy is ``n = (1 - Z) / 2``, so every estimator here is a count.
``correlation`` is the plain two-point function ``<n_i n_j>`` and
``normalized_correlation`` the conditional version ``<n_i n_j> / <n_i>``
whose error bars come from delete-block jackknife (it is a ratio of
means).

The scans (:func:`correlation_scan`, :func:`phase_scan`) do not
materialize trajectories; they stream through compiled kernels.  The
correlation scan reproduces the open-boundary setup used for the critical
phase diagnostics: a square (cube) patch addressed in lattice-vector
coordinates whose in-flowing boundary layers are held all-active, with the
reference site at the patch center.  Counter-based RNG keys make scans
with equal seeds share trajectories site for site, so separate directions
are measured on the same ensemble.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, _mix
from .automata import LatticeSpec, TrajectoryEnsemble, UpdateRule, dk_rule, dk_bond_line, bond_dp_rule_2d
from .errors import (
    DegenerateDenominatorError,
    OutOfBoundsError,
    OutOfRangeError,
    UnsupportedParametersError,
)

__all__ = [
    "SitePoint",
    "EstimatorSeries",
    "DIRECTIONS_2D",
    "DIRECTIONS_3D",
    "density",
    "correlation",
    "normalized_correlation",
    "correlation_scan",
    "phase_scan",
]

# Scan directions in lattice-vector coordinates.  Y advances only along
# the time diagonal; X is purely spatial; XMINUSY is a single lattice
# vector, the mixed space-time diagonal of the automaton frame.
DIRECTIONS_2D = {"y": (1, 1), "x": (1, -1), "xminusy": (0, 1)}
DIRECTIONS_3D = {"y": (1, 1, 1), "x": (1, -1, 0), "xminusy": (1, 0, 0)}


@dataclass(frozen=True)
class SitePoint:
    """A site of a stored trajectory: row index ``y``, position ``x``."""

    x: int
    y: int
    z: int = 0


@dataclass
class EstimatorSeries:
    """A 1D series of estimates with errors, ready for CSV round trips."""

    x: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int
    x_label: str = "r"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.stderr = np.asarray(self.stderr, dtype=np.float64)
        if not (self.x.shape == self.values.shape == self.stderr.shape):
            raise OutOfRangeError("series columns must have equal lengths")
        if np.any(np.diff(self.x) <= 0):
            raise OutOfRangeError("series x values must be strictly increasing")

    def to_csv(self) -> str:
        """Render as CSV with ``# key = value`` comment headers."""
        buf = io.StringIO()
        for key in sorted(self.meta):
            buf.write(f"# {key} = {self.meta[key]}\n")
        buf.write(f"{self.x_label},value,stderr,n_samples\n")
        for xi, vi, si in zip(self.x, self.values, self.stderr):
            buf.write(f"{xi:.17g},{vi:.17g},{si:.17g},{self.n_samples}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EstimatorSeries":
        meta: dict = {}
        rows: list[tuple[float, float, float, int]] = []
        x_label = "r"
        header_seen = False
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            if not header_seen:
                x_label = line.split(",")[0]
                header_seen = True
                continue
            cols = line.split(",")
            rows.append((float(cols[0]), float(cols[1]), float(cols[2]), int(cols[3])))
        if not rows:
            raise OutOfRangeError("CSV contains no data rows")
        xs, vals, errs, ns = zip(*rows)
        return cls(
            x=np.array(xs),
            values=np.array(vals),
            stderr=np.array(errs),
            n_samples=ns[0],
            x_label=x_label,
            meta=meta,
        )


# ---------------------------------------------------------------------------
# ensemble estimators


def _site_values(ensemble: TrajectoryEnsemble, site: SitePoint) -> np.ndarray:
    traj = ensemble.trajectories
    if ensemble.lattice.geometry == "cubic3d":
        if not (
            0 <= site.y < traj.shape[1]
            and 0 <= site.x < traj.shape[2]
            and 0 <= site.z < traj.shape[3]
        ):
            raise OutOfBoundsError(f"site {site} outside stored trajectory")
        return traj[:, site.y, site.x, site.z]
    if not (0 <= site.y < traj.shape[1] and 0 <= site.x < traj.shape[2]):
        raise OutOfBoundsError(f"site {site} outside stored trajectory")
    return traj[:, site.y, site.x]


def density(ensemble: TrajectoryEnsemble, site: SitePoint) -> tuple[float, float]:
    """Mean occupation of a site with its binomial standard error."""
    vals = _site_values(ensemble, site)
    if ensemble.weights is not None:
        return float(np.dot(ensemble.weights, vals)), 0.0
    n = vals.shape[0]
    mean = vals.mean()
    return float(mean), float(np.sqrt(mean * (1.0 - mean) / n))


def correlation(
    ensemble: TrajectoryEnsemble, i: SitePoint, j: SitePoint
) -> tuple[float, float]:
    """Joint occupation ``<n_i n_j>`` with binomial standard error."""
    prod = _site_values(ensemble, i) * _site_values(ensemble, j)
    if ensemble.weights is not None:
        return float(np.dot(ensemble.weights, prod)), 0.0
    n = prod.shape[0]
    mean = prod.mean()
    return float(mean), float(np.sqrt(mean * (1.0 - mean) / n))


def _jackknife_ratio(
    num: np.ndarray, den: np.ndarray, n_blocks: int
) -> tuple[float, float]:
    """Delete-block jackknife for sum(num)/sum(den) over samples."""
    n = num.shape[0]
    n_blocks = max(2, min(n_blocks, n))
    edges = np.linspace(0, n, n_blocks + 1, dtype=np.int64)
    bnum = np.add.reduceat(num.astype(np.float64), edges[:-1])
    bden = np.add.reduceat(den.astype(np.float64), edges[:-1])
    tot_num = bnum.sum()
    tot_den = bden.sum()
    if tot_den <= 0:
        raise DegenerateDenominatorError("reference site never active in ensemble")
    loo_den = tot_den - bden
    if np.any(loo_den <= 0):
        raise DegenerateDenominatorError(
            "reference site too rarely active for jackknife blocks"
        )
    loo = (tot_num - bnum) / loo_den
    center = loo.mean()
    var = (n_blocks - 1) / n_blocks * np.sum((loo - center) ** 2)
    return float(tot_num / tot_den), float(np.sqrt(var))


def normalized_correlation(
    ensemble: TrajectoryEnsemble,
    i: SitePoint,
    j: SitePoint,
    n_blocks: int = 64,
) -> tuple[float, float]:
    """Conditional correlation ``<n_i n_j> / <n_i>`` with jackknife error."""
    vi = _site_values(ensemble, i)
    vj = _site_values(ensemble, j)
    if ensemble.weights is not None:
        den = float(np.dot(ensemble.weights, vi))
        if den <= 0:
            raise DegenerateDenominatorError("reference site has zero density")
        return float(np.dot(ensemble.weights, vi * vj)) / den, 0.0
    return _jackknife_ratio(vi * vj, vi, n_blocks)


# ---------------------------------------------------------------------------
# streaming scans


def _direction_vector(direction, geometry: str) -> tuple[int, ...]:
    table = DIRECTIONS_3D if geometry == "cubic3d" else DIRECTIONS_2D
    if isinstance(direction, str):
        try:
            return table[direction.lower()]
        except KeyError:
            raise UnsupportedParametersError(
                f"unknown direction {direction!r}; expected one of {sorted(table)}"
            ) from None
    vec = tuple(int(c) for c in direction)
    need = 3 if geometry == "cubic3d" else 2
    if len(vec) != need or all(c == 0 for c in vec):
        raise UnsupportedParametersError(f"bad direction vector {direction!r}")
    return vec


def _scan_meta(rule: UpdateRule, lattice: LatticeSpec, seed: int, extra: dict) -> dict:
    from . import __version__

    meta = {
        "rule_table": ",".join(f"{p:.17g}" for p in rule.table),
        "rule_arity": str(rule.arity),
        "geometry": lattice.geometry,
        "L": str(lattice.Lx),
        "seed": str(seed),
        "version": __version__,
    }
    meta.update({k: str(v) for k, v in extra.items()})
    return meta


def correlation_scan(
    rule: UpdateRule,
    lattice: LatticeSpec,
    direction,
    r_list,
    n_samples: int,
    seed: int,
    n_blocks: int = 64,
) -> EstimatorSeries:
    """Normalized correlation from the patch center along one direction.

    The patch is ``lattice`` addressed in lattice-vector coordinates
    (``Lx`` must equal ``Ly``, and ``Lz`` for cubic geometry), its two
    (three) in-flowing boundary layers pinned all-active.  Identical
    seeds share trajectories across directions, because each site value
    is a pure function of ``(seed, sample, site)``.
    """
    if lattice.geometry == "cubic3d":
        if not (lattice.Lx == lattice.Ly == lattice.Lz):
            raise UnsupportedParametersError("corner scan needs a cubic patch")
    elif lattice.Lx != lattice.Ly:
        raise UnsupportedParametersError("corner scan needs a square patch")
    if rule.arity != (3 if lattice.geometry == "cubic3d" else 2):
        raise UnsupportedParametersError("rule arity does not match lattice geometry")
    L = lattice.Lx
    c = L // 2
    vec = _direction_vector(direction, lattice.geometry)
    rs = np.asarray(list(r_list), dtype=np.int64)
    if rs.size == 0 or np.any(rs <= 0) or np.any(np.diff(rs) <= 0):
        raise OutOfRangeError("r_list must be positive and strictly increasing")
    if n_samples < 2:
        raise OutOfRangeError("need at least two samples")

    dims = 3 if lattice.geometry == "cubic3d" else 2
    targets = np.empty((rs.size + 1, dims), dtype=np.int64)
    targets[0] = c
    for k, r in enumerate(rs):
        site = tuple(c + r * vec[d] for d in range(dims))
        if any(not (0 <= s < L) for s in site):
            raise OutOfBoundsError(
                f"separation {int(r)} along {vec} leaves the patch (center {c}, L {L})"
            )
        targets[k + 1] = site

    keys = np.ascontiguousarray(_mix.stream_key(seed, np.arange(n_samples)))
    obs = np.empty((n_samples, targets.shape[0]), dtype=np.uint8)
    if dims == 2:
        vbound = _cone_bounds(targets[:, 0], targets[:, 1], L)
        _kernels.corner_square_sites(
            rule.as_array(), L, vbound, keys, targets[:, 0].copy(), targets[:, 1].copy(), obs
        )
    else:
        vbound = _cone_bounds(targets[:, 0], targets[:, 1], L)
        wbound = _cone_bounds(targets[:, 0], targets[:, 2], L)
        _kernels.corner_cube_sites(
            rule.as_array(),
            L,
            vbound,
            wbound,
            keys,
            targets[:, 0].copy(),
            targets[:, 1].copy(),
            targets[:, 2].copy(),
            obs,
        )

    ref = obs[:, 0]
    values = np.empty(rs.size)
    errors = np.empty(rs.size)
    for k in range(rs.size):
        values[k], errors[k] = _jackknife_ratio(ref * obs[:, k + 1], ref, n_blocks)
    meta = _scan_meta(
        rule,
        lattice,
        seed,
        {
            "observable": "normalized_correlation",
            "direction": direction if isinstance(direction, str) else str(vec),
            "center": c,
            "n_samples": n_samples,
            "reference_density": f"{ref.mean():.17g}",
        },
    )
    return EstimatorSeries(
        x=rs.astype(np.float64),
        values=values,
        stderr=errors,
        n_samples=n_samples,
        x_label="r",
        meta=meta,
    )


def _cone_bounds(tu: np.ndarray, tother: np.ndarray, L: int) -> np.ndarray:
    """Per-u sweep limit covering the causal cones of all targets."""
    bound = np.full(L, -1, dtype=np.int64)
    for u, o in zip(tu, tother):
        bound[: u + 1] = np.maximum(bound[: u + 1], o)
    return bound


def phase_scan(
    rule_family,
    p_list,
    lattice: LatticeSpec,
    n_steps: int,
    n_samples: int,
    seed: int,
    tail_rows: int = 1,
) -> EstimatorSeries:
    """Late-time density on the row lattice versus the rule parameter.

    ``rule_family`` maps a probability to an :class:`UpdateRule`; the
    strings ``"site"``, ``"bond"`` and ``"bond3"`` select the built-in
    families.  Each sample starts all-active and runs ``n_steps`` rows;
    the density is averaged over the final ``tail_rows`` rows.
    """
    family = _rule_family(rule_family)
    ps = np.asarray(list(p_list), dtype=np.float64)
    if ps.size == 0 or np.any(np.diff(ps) <= 0):
        raise OutOfRangeError("p_list must be strictly increasing")
    if np.any(ps < 0) or np.any(ps > 1):
        raise OutOfRangeError("p values must lie in [0, 1]")
    if lattice.geometry != "brickwork2d":
        raise UnsupportedParametersError("phase_scan runs on brickwork rows")
    if not 1 <= tail_rows <= n_steps:
        raise OutOfRangeError("need 1 <= tail_rows <= n_steps")
    if family(float(ps[0])).arity != 2:
        raise UnsupportedParametersError("phase_scan needs a two-parent rule family")
    keys = np.ascontiguousarray(_mix.stream_key(seed, np.arange(n_samples)))
    values = np.empty(ps.size)
    errors = np.empty(ps.size)
    counts = np.empty(n_samples, dtype=np.int64)
    denom = tail_rows * lattice.Lx
    for k, p in enumerate(ps):
        rule = family(float(p))
        _kernels.row_tail_counts(
            rule.as_array(),
            lattice.Lx,
            n_steps,
            tail_rows,
            lattice.boundary_x == "periodic",
            keys,
            counts,
        )
        fracs = counts / denom
        values[k] = fracs.mean()
        errors[k] = fracs.std(ddof=1) / np.sqrt(n_samples)
    rule0 = family(float(ps[0]))
    meta = _scan_meta(
        rule0,
        lattice,
        seed,
        {
            "observable": "late_time_density",
            "n_steps": n_steps,
            "tail_rows": tail_rows,
            "n_samples": n_samples,
            "family": rule_family if isinstance(rule_family, str) else "custom",
        },
    )
    meta.pop("rule_table")
    return EstimatorSeries(
        x=ps,
        values=values,
        stderr=errors,
        n_samples=n_samples,
        x_label="p",
        meta=meta,
    )


def _rule_family(rule_family):
    if callable(rule_family):
        return rule_family
    if rule_family == "site":
        return lambda p: dk_rule(0.0, p, p)
    if rule_family == "bond":
        return dk_bond_line
    if rule_family == "bond3":
        return bond_dp_rule_2d
    raise UnsupportedParametersError(
        f"unknown rule family {rule_family!r}; expected site, bond or bond3"
    )
