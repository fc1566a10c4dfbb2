"""Torus grids, Fourier transform pairs, and divergence-free field operations.

Velocity fields live on the periodic box [0, L)^dim and are stored as full
complex Fourier coefficient lattices (one per component), normalized so that

    u(x) = sum_k c_k exp(i k . x),   k = (2*pi/L) * m,  m integer lattice.

With that convention Parseval reads ||u||_L2^2 = V * sum_k |c_k|^2 where
V = L^dim, and all Sobolev norms are plain weighted coefficient sums.
The constant (k=0) mode is projected out everywhere: it is undamped by the
Laplacian and plays no role in the mean-zero solution space.
"""

import struct

import numpy as np

from .errors import ContractViolation, NumericalFailure

TWO_PI = 2.0 * np.pi

_MAGIC = b"BFLD"
_VERSION = 1


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


class Grid:
    """Uniform periodic lattice with cached wavenumber arrays.

    n is restricted to powers of two (>= 4). The smallest nonzero |k|^2,
    lam1 = (2*pi/L)^2, is the spectral gap that drives every decay rate.
    """

    def __init__(self, dim, n, length=TWO_PI):
        if dim not in (2, 3):
            raise ContractViolation(f"dim must be 2 or 3, got {dim}")
        if n < 4 or not _is_power_of_two(n):
            raise ContractViolation(f"n must be a power of two >= 4, got {n}")
        if not (length > 0):
            raise ContractViolation(f"length must be positive, got {length}")
        self.dim = int(dim)
        self.n = int(n)
        self.length = float(length)
        self.shape = (self.n,) * self.dim
        self.npoints = self.n ** self.dim
        self.volume = self.length ** self.dim
        self.lam1 = (TWO_PI / self.length) ** 2

        # integer lattice per axis in fft ordering: 0, 1, ..., n/2-1, -n/2, ..., -1
        m1d = np.fft.fftfreq(self.n, 1.0 / self.n).astype(np.int64)
        self.m1d = m1d
        self.k1d = (TWO_PI / self.length) * m1d.astype(np.float64)

        # broadcastable k arrays, one per axis
        self.kvec = []
        for ax in range(self.dim):
            sh = [1] * self.dim
            sh[ax] = self.n
            self.kvec.append(self.k1d.reshape(sh))
        self.ksq = sum(kv ** 2 for kv in self.kvec)
        with np.errstate(divide="ignore"):
            inv = np.where(self.ksq > 0, 1.0 / np.where(self.ksq > 0, self.ksq, 1.0), 0.0)
        self.inv_ksq = inv

        # two-thirds rule: keep |m_i| <= n//3 on every axis
        keep = np.ones(self.shape, dtype=bool)
        cut = self.n // 3
        for ax in range(self.dim):
            sh = [1] * self.dim
            sh[ax] = self.n
            keep &= (np.abs(m1d).reshape(sh) <= cut)
        self.dealias_mask = keep

        # the self-paired Nyquist frequencies (|m_i| = n/2) cannot carry the
        # odd-in-k algebra consistently; the projector removes them
        no_nyq = np.ones(self.shape, dtype=bool)
        for ax in range(self.dim):
            sh = [1] * self.dim
            sh[ax] = self.n
            no_nyq &= (np.abs(m1d).reshape(sh) != self.n // 2)
        self.non_nyquist_mask = no_nyq

        self.x1d = np.arange(self.n) * (self.length / self.n)

    def __eq__(self, other):
        return (isinstance(other, Grid) and self.dim == other.dim
                and self.n == other.n and self.length == other.length)

    def __repr__(self):
        return f"Grid(dim={self.dim}, n={self.n}, length={self.length})"

    def meshgrid(self):
        """Physical collocation coordinates, one array per axis."""
        return np.meshgrid(*([self.x1d] * self.dim), indexing="ij")


class SpectralField:
    """Vector field as Fourier coefficients, shape (dim, n, ..., n) complex.

    Flags record guarantees established by the constructing operation;
    checkers below verify them against the data when needed.
    """

    def __init__(self, grid, data, divergence_free=False, mean_zero=False,
                 dealiased=False):
        data = np.asarray(data, dtype=np.complex128)
        if data.shape != (grid.dim,) + grid.shape:
            raise ContractViolation(
                f"coefficient array shape {data.shape} does not match grid {grid}")
        self.grid = grid
        self.data = data
        self.divergence_free = divergence_free
        self.mean_zero = mean_zero
        self.dealiased = dealiased

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.dim,) + grid.shape, dtype=np.complex128),
                   divergence_free=True, mean_zero=True, dealiased=True)

    def copy(self):
        return SpectralField(self.grid, self.data.copy(),
                             divergence_free=self.divergence_free,
                             mean_zero=self.mean_zero, dealiased=self.dealiased)

    def _zero_index(self):
        return (slice(None),) + (0,) * self.grid.dim


class PhysicalField:
    """Vector field sampled on the collocation grid, shape (dim, n, ..., n) real."""

    def __init__(self, grid, data):
        data = np.asarray(data, dtype=np.float64)
        if data.shape != (grid.dim,) + grid.shape:
            raise ContractViolation(
                f"sample array shape {data.shape} does not match grid {grid}")
        self.grid = grid
        self.data = data

    def magnitude(self):
        return np.sqrt(np.sum(self.data ** 2, axis=0))


def _spatial_axes(grid):
    return tuple(range(1, grid.dim + 1))


def to_physical(u):
    """Inverse transform; the imaginary residue of a symmetric field is dropped."""
    phys = np.fft.ifftn(u.data, axes=_spatial_axes(u.grid)) * u.grid.npoints
    return PhysicalField(u.grid, phys.real)


def to_spectral(p):
    """Forward transform to Fourier-series coefficients."""
    coef = np.fft.fftn(p.data, axes=_spatial_axes(p.grid)) / p.grid.npoints
    return SpectralField(p.grid, coef)


def imaginary_residue(u):
    """Max |Im| of the physical-space samples; ~1e-16 for conjugate-symmetric data."""
    phys = np.fft.ifftn(u.data, axes=_spatial_axes(u.grid)) * u.grid.npoints
    return float(np.max(np.abs(phys.imag)))


def hermitian_symmetrize(grid, coef):
    """Project a coefficient array onto conjugate symmetry c(-k) = conj(c(k))."""
    rev = coef
    for ax in _spatial_axes(grid):
        rev = np.roll(np.flip(rev, axis=ax), 1, axis=ax)
    return 0.5 * (coef + np.conj(rev))


def leray_project(u):
    """Remove the gradient part mode by mode: c -> c - k (k.c)/|k|^2.

    The k=0 mode and the self-paired Nyquist frequencies are zeroed as part
    of the projection: neither lives in the mean-zero divergence-free space
    the dynamics works in, and the Nyquist rows would break conjugate
    symmetry under the modewise formula. Still an orthogonal projector.
    """
    g = u.grid
    dot = sum(g.kvec[i] * u.data[i] for i in range(g.dim))
    out = np.empty_like(u.data)
    for i in range(g.dim):
        out[i] = (u.data[i] - g.kvec[i] * dot * g.inv_ksq) * g.non_nyquist_mask
    out[(slice(None),) + (0,) * g.dim] = 0.0
    return SpectralField(g, out, divergence_free=True, mean_zero=True,
                         dealiased=u.dealiased)


def apply_laplacian(u):
    """Stokes operator on divergence-free fields: multiply by -|k|^2."""
    return SpectralField(u.grid, -u.grid.ksq * u.data,
                         divergence_free=u.divergence_free, mean_zero=True,
                         dealiased=u.dealiased)


def apply_inverse_stokes(u):
    """Divide by -|k|^2 on mean-zero fields; errors if the k=0 mode is nonzero."""
    g = u.grid
    zmode = u.data[(slice(None),) + (0,) * g.dim]
    if np.any(zmode != 0):
        raise ContractViolation("inverse Stokes requires a mean-zero field")
    return SpectralField(g, -u.data * g.inv_ksq,
                         divergence_free=u.divergence_free, mean_zero=True,
                         dealiased=u.dealiased)


def dealias(u):
    """Two-thirds rule truncation: zero every mode with any |m_i| > n//3."""
    return SpectralField(u.grid, u.data * u.grid.dealias_mask,
                         divergence_free=u.divergence_free,
                         mean_zero=u.mean_zero, dealiased=True)


def sobolev_norm(u, s):
    """Homogeneous H^s norm: sqrt(V * sum_k |k|^(2s) |c_k|^2).

    The k=0 mode carries weight 1 for s=0 (plain L2) and weight 0 for s>0;
    s<0 requires a mean-zero field.
    """
    g = u.grid
    s = float(s)
    if s < 0:
        zmode = u.data[(slice(None),) + (0,) * g.dim]
        if np.any(zmode != 0):
            raise ContractViolation("negative-order norms require a mean-zero field")
    if s == 0.0:
        w = np.ones(g.shape)
    else:
        with np.errstate(divide="ignore"):
            w = np.where(g.ksq > 0, np.where(g.ksq > 0, g.ksq, 1.0) ** s, 0.0)
    total = np.sum(w * np.sum(np.abs(u.data) ** 2, axis=0))
    return float(np.sqrt(g.volume * total))


def lebesgue_norm(p, power):
    """L^p norm of the pointwise Euclidean magnitude by grid quadrature."""
    power = float(power)
    if not np.isfinite(power) or power < 1:
        raise ContractViolation(f"p must be finite and >= 1, got {power}")
    if not np.all(np.isfinite(p.data)):
        raise NumericalFailure("lebesgue_norm: field contains non-finite values")
    mag = p.magnitude()
    cellvol = p.grid.volume / p.grid.npoints
    return float((np.sum(mag ** power) * cellvol) ** (1.0 / power))


def inner_product(u, v):
    """Discrete L2 inner product V * Re sum_k c_u . conj(c_v)."""
    if u.grid != v.grid:
        raise ContractViolation("inner_product: mismatched grids")
    return float(u.grid.volume * np.sum(u.data * np.conj(v.data)).real)


def max_pointwise_magnitude(u):
    return float(np.max(to_physical(u).magnitude()))


# scalar fields (pressure, potentials) share the lattice but carry no component axis

def scalar_to_physical(grid, coef):
    return (np.fft.ifftn(coef) * grid.npoints).real


def scalar_to_spectral(grid, values):
    return np.fft.fftn(values) / grid.npoints


def scalar_gradient(grid, coef):
    """Gradient of a scalar spectral field as a SpectralField (i k_j phi_k)."""
    comp = [1j * grid.kvec[i] * coef for i in range(grid.dim)]
    return SpectralField(grid, np.stack(comp))


def scalar_sobolev_norm(grid, coef, s):
    s = float(s)
    if s == 0.0:
        w = np.ones(grid.shape)
    else:
        with np.errstate(divide="ignore"):
            w = np.where(grid.ksq > 0, np.where(grid.ksq > 0, grid.ksq, 1.0) ** s, 0.0)
    return float(np.sqrt(grid.volume * np.sum(w * np.abs(coef) ** 2)))


# flag checkers used by tests and by checkpoint loading

def max_divergence(u):
    """Max over modes of |k . c| (absolute, in spectral units)."""
    g = u.grid
    dot = sum(g.kvec[i] * u.data[i] for i in range(g.dim))
    return float(np.max(np.abs(dot)))


def divergence_ok(u, tol=1e-12):
    g = u.grid
    kmag = np.sqrt(g.ksq)
    scale = np.max(kmag * np.max(np.abs(u.data), axis=0))
    return max_divergence(u) <= tol * max(1.0, scale)


def mean_zero_ok(u):
    return not np.any(u.data[(slice(None),) + (0,) * u.grid.dim] != 0)


def dealiased_ok(u):
    return not np.any(u.data[:, ~u.grid.dealias_mask] != 0)


def prolong(u, fine_grid):
    """Embed a field into a finer lattice (same box, more modes).

    Fourier coefficients are grid-independent in this normalization, so the
    prolonged field represents the identical trigonometric polynomial. The
    source is dealiased first so no ambiguous Nyquist content is copied.
    """
    g = u.grid
    if fine_grid.dim != g.dim or fine_grid.length != g.length \
            or fine_grid.n < g.n:
        raise ContractViolation("prolong needs a finer grid on the same box")
    src = u.data * g.dealias_mask
    idx = [m % fine_grid.n for m in g.m1d]
    out = np.zeros((g.dim,) + fine_grid.shape, dtype=np.complex128)
    out[np.ix_(range(g.dim), *([idx] * g.dim))] = src
    return SpectralField(fine_grid, out, divergence_free=u.divergence_free,
                         mean_zero=u.mean_zero, dealiased=True)


# checkpoint I/O: magic "BFLD", version 1, dim u8, n u32 LE, L f64 LE, then
# per component the full complex lattice as interleaved (re, im) f64 LE pairs
# in row-major order.

def write_checkpoint(u, path):
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<BB", _VERSION, g.dim))
        fh.write(struct.pack("<I", g.n))
        fh.write(struct.pack("<d", g.length))
        for i in range(g.dim):
            fh.write(np.ascontiguousarray(u.data[i]).astype("<c16").tobytes())


def read_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ContractViolation(f"bad checkpoint magic {magic!r}")
        version, dim = struct.unpack("<BB", fh.read(2))
        if version != _VERSION:
            raise ContractViolation(f"unsupported checkpoint version {version}")
        (n,) = struct.unpack("<I", fh.read(4))
        (length,) = struct.unpack("<d", fh.read(8))
        grid = Grid(dim, n, length)
        comps = []
        count = grid.npoints
        for _ in range(dim):
            buf = fh.read(16 * count)
            if len(buf) != 16 * count:
                raise ContractViolation("truncated checkpoint file")
            comps.append(np.frombuffer(buf, dtype="<c16").reshape(grid.shape))
        extra = fh.read(1)
        if extra:
            raise ContractViolation("trailing bytes in checkpoint file")
    data = np.stack([c.astype(np.complex128) for c in comps])
    field = SpectralField(grid, data)
    field.mean_zero = mean_zero_ok(field)
    field.divergence_free = divergence_ok(field)
    field.dealiased = dealiased_ok(field)
    return field
