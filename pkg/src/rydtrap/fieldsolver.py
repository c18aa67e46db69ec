"""Axisymmetric finite-difference Laplace solver for the electrode basis fields.

One sparse direct factorization per geometry serves all electrode groups:
conductor cells are Dirichlet rows, so only the right-hand side changes
between groups.  Grid potentials are wrapped in bicubic splines, giving a
C1 field (and continuous force gradients) everywhere in the domain.
"""

import logging
import os

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RectBivariateSpline
from scipy.sparse.linalg import splu

from .errors import GeometryError, SolverError
from .geometry import GROUP_ROLES

log = logging.getLogger(__name__)

CACHE_FORMAT = 3
RESIDUAL_TOL = 1e-8


def _build_grid(geom):
    h = geom.mesh_step
    nr = int(round(geom.r_max / h)) + 1
    nz = 2 * int(round(geom.z_max / h)) + 1
    r = np.linspace(0.0, geom.r_max, nr)
    z = np.linspace(-geom.z_max, geom.z_max, nz)
    return r, z


def _rasterize(geom, r, z):
    """Per-group Dirichlet values on the grid; NaN marks vacuum."""
    conductor = np.zeros((r.size, z.size), dtype=bool)
    group_values = {}
    for role, rects in geom.groups.items():
        vals = np.full((r.size, z.size), np.nan)
        for rect, sign in rects:
            ir = (r >= rect.r0 - 1e-12) & (r <= rect.r1 + 1e-12)
            iz = (z >= rect.z0 - 1e-12) & (z <= rect.z1 + 1e-12)
            cells = np.outer(ir, iz)
            overlap = cells & ~np.isnan(vals) & (vals != sign)
            if overlap.any():
                raise GeometryError(f"conflicting potentials within group {role!r}")
            vals[cells] = sign
            conductor |= cells
        group_values[role] = vals
    # conductors shared between groups are fine; a grounded electrode in one
    # group must still be metal (0 V) when another group is driven
    for role in geom.groups:
        v = group_values[role]
        v[conductor & np.isnan(v)] = 0.0
    return conductor, group_values


def _laplace_matrix(r, z, dirichlet_mask):
    """Sparse operator for the axisymmetric Laplacian with Dirichlet rows."""
    nr, nz = r.size, z.size
    h = r[1] - r[0]
    n = nr * nz

    def idx(i, j):
        return i * nz + j

    rows, cols, data = [], [], []
    for i in range(nr):
        ri = r[i]
        for j in range(nz):
            k = idx(i, j)
            boundary = (i == nr - 1) or (j == 0) or (j == nz - 1)
            if dirichlet_mask[i, j] or boundary:
                rows.append(k); cols.append(k); data.append(1.0)
                continue
            # z neighbours
            rows += [k, k, k]
            cols += [idx(i, j - 1), k, idx(i, j + 1)]
            data += [1.0, -4.0 if i == 0 else -4.0, 1.0]
            if i == 0:
                # on-axis regularity: phi_rr + phi_r/r -> 2 phi_rr
                rows += [k, k]
                cols += [idx(1, j), k]
                data += [4.0, -2.0]
            else:
                cr = h / (2.0 * ri)
                rows += [k, k]
                cols += [idx(i - 1, j), idx(i + 1, j)]
                data += [1.0 - cr, 1.0 + cr]
    # merge duplicate center entries
    A = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    return A


def solve_dirichlet(r, z, dirichlet_values, lu=None, mask=None):
    """Solve Laplace with Dirichlet data (NaN = vacuum cell).

    Returns (phi, lu, mask); pass lu/mask back in to reuse the
    factorization for further right-hand sides on the same conductors.
    """
    if mask is None:
        mask = ~np.isnan(dirichlet_values)
    if lu is None:
        A = _laplace_matrix(r, z, mask)
        lu = splu(A.tocsc())
    rhs = np.where(np.isnan(dirichlet_values), 0.0, dirichlet_values).ravel()
    # boundary rows keep zero; conductor rows carry their potential
    phi = lu.solve(rhs).reshape(r.size, z.size)
    if not np.all(np.isfinite(phi)):
        raise SolverError("direct solve produced non-finite potential")
    return phi, lu, mask


def _relative_residual(r, z, phi, mask):
    """Max-norm Laplace residual of the solution, relative to max|phi|."""
    h = r[1] - r[0]
    res = np.zeros_like(phi)
    interior = np.zeros_like(phi, dtype=bool)
    interior[1:-1, 1:-1] = True
    interior[0, 1:-1] = True
    interior &= ~mask
    rr = r[:, None]
    lap = np.zeros_like(phi)
    lap[1:-1, 1:-1] = (
        phi[2:, 1:-1] - 2 * phi[1:-1, 1:-1] + phi[:-2, 1:-1]
        + (phi[2:, 1:-1] - phi[:-2, 1:-1]) * h / (2 * rr[1:-1])
        + phi[1:-1, 2:] - 2 * phi[1:-1, 1:-1] + phi[1:-1, :-2]
    )
    lap[0, 1:-1] = 4 * (phi[1, 1:-1] - phi[0, 1:-1]) + phi[0, 2:] - 2 * phi[0, 1:-1] + phi[0, :-2]
    res[interior] = np.abs(lap[interior])
    scale = np.max(np.abs(phi))
    return float(res.max() / scale) if scale > 0 else 0.0


class BasisFieldSet:
    """Unit-volt basis potentials per electrode group, spline-wrapped."""

    def __init__(self, r, z, potentials, geometry_hash, mesh_step):
        self.r = r
        self.z = z
        self.potentials = potentials          # role -> phi grid
        self.geometry_hash = geometry_hash
        self.mesh_step = mesh_step
        self._splines = {
            role: RectBivariateSpline(r, z, phi, kx=3, ky=3)
            for role, phi in potentials.items()
        }

    @property
    def roles(self):
        return list(self.potentials)

    def potential(self, role, r, z):
        return self._splines[role].ev(r, z)

    def field(self, role, r, z, dr=0, dz=0):
        """(E_r, E_z) of the unit-volt basis, optionally differentiated."""
        s = self._splines[role]
        er = -s.ev(r, z, dx=1 + dr, dy=dz)
        ez = -s.ev(r, z, dx=dr, dy=1 + dz)
        return er, ez

    def in_domain(self, r, z):
        return (r <= self.r[-1]) & (np.abs(z) <= self.z[-1])

    def save(self, path):
        np.savez_compressed(
            path,
            format=np.int64(CACHE_FORMAT),
            r=self.r,
            z=self.z,
            geometry_hash=np.frombuffer(bytes.fromhex(self.geometry_hash), dtype=np.uint8),
            mesh_step=np.float64(self.mesh_step),
            roles=np.array(self.roles),
            **{f"phi_{role}": self.potentials[role] for role in self.roles},
        )

    @classmethod
    def load(cls, path, expect_hash=None):
        with np.load(path, allow_pickle=False) as data:
            if int(data["format"]) != CACHE_FORMAT:
                raise SolverError("basis cache format mismatch")
            got_hash = bytes(data["geometry_hash"].tobytes()).hex()
            if expect_hash is not None and got_hash != expect_hash:
                raise SolverError("basis cache geometry hash mismatch")
            potentials = {str(role): data[f"phi_{role}"] for role in data["roles"]}
            return cls(data["r"], data["z"], potentials, got_hash, float(data["mesh_step"]))


def solve_basis_fields(geom, cache_path=None):
    """Solve the unit-volt basis potential for every electrode group.

    With cache_path set, a valid cached solve (matching geometry hash) is
    returned without re-solving; a corrupted or stale cache is rebuilt.
    """
    ghash = geom.content_hash()
    if cache_path and os.path.exists(cache_path):
        try:
            basis = BasisFieldSet.load(cache_path, expect_hash=ghash)
            log.info("basis cache hit: %s", cache_path)
            return basis
        except Exception as ex:  # corrupted/stale cache -> rebuild
            log.warning("basis cache rejected (%s); re-solving", ex)
    r, z = _build_grid(geom)
    conductor, group_values = _rasterize(geom, r, z)

    lu = None
    potentials = {}
    for role in GROUP_ROLES:
        if role not in group_values:
            continue
        phi, lu, mask = solve_dirichlet(r, z, group_values[role], lu=lu, mask=conductor)
        resid = _relative_residual(r, z, phi, mask)
        if resid > RESIDUAL_TOL:
            raise SolverError(f"Laplace residual {resid:.2e} above tolerance", residual=resid)
        potentials[role] = phi

    basis = BasisFieldSet(r, z, potentials, ghash, geom.mesh_step)
    if cache_path:
        os.makedirs(os.path.dirname(os.path.abspath(cache_path)), exist_ok=True)
        basis.save(cache_path)
        log.info("basis cache written: %s", cache_path)
    return basis


def hexapole_dirichlet(r, z, scale, v0):
    """Dirichlet data for electrodes shaped on the exact hexapole equipotentials.

    The +-v0 equipotentials of phi = q (z^3 - 1.5 z r^2), with q scaled so the
    surfaces sit at distance `scale` from the origin on the axis, become the
    conductors: the idealized version of the ring-stack drive.
    """
    q = v0 / scale**3
    rr, zz = np.meshgrid(r, z, indexing="ij")
    phi_hex = q * (zz**3 - 1.5 * zz * rr**2)
    vals = np.full(rr.shape, np.nan)
    vals[phi_hex >= v0] = v0
    vals[phi_hex <= -v0] = -v0
    # keep the outer boundary away from the conductors
    return vals, phi_hex
