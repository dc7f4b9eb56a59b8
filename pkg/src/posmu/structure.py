"""Uncertainty block structures, their reduction, and perturbation certificates.

A perturbation set is described by an ordered list of blocks, each either a
full matrix block or a repeated-scalar block (delta times identity), over the
real or complex field.  For nonnegative interconnection matrices the analysis
collapses to an all-real structure in which every repeated-scalar block of
size m is replaced by m independent 1x1 full blocks; that reduced form is what
the numeric engines consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _linalg
from .errors import InputError, NumericalFailure

KINDS = ("full", "scalar")
FIELDS = ("real", "complex")


@dataclass(frozen=True)
class BlockSpec:
    """One uncertainty block: a full matrix or a repeated scalar."""

    kind: str
    size: int
    field: str = "real"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown block kind {self.kind!r}; expected one of {KINDS}")
        if self.field not in FIELDS:
            raise InputError(f"unknown block field {self.field!r}; expected one of {FIELDS}")
        if not isinstance(self.size, (int, np.integer)) or self.size < 1:
            raise InputError(f"block size must be a positive integer, got {self.size!r}")


@dataclass(frozen=True)
class BlockStructure:
    """Canonically ordered block structure: full blocks first, then scalars.

    ``permutation`` maps canonical coordinate positions to the coordinate
    positions of the block list as originally given, so a matrix laid out in
    the original order is brought to canonical layout by
    ``M[perm][:, perm]`` (see :meth:`permute_matrix`).
    """

    blocks: tuple[BlockSpec, ...]
    permutation: tuple[int, ...]
    block_order: tuple[int, ...]

    @property
    def total_dim(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(b.size for b in self.blocks)

    @property
    def has_complex(self) -> bool:
        return any(b.field == "complex" for b in self.blocks)

    @property
    def has_scalar(self) -> bool:
        return any(b.kind == "scalar" for b in self.blocks)

    @property
    def is_permuted(self) -> bool:
        return self.permutation != tuple(range(self.total_dim))

    def permute_matrix(self, m: np.ndarray) -> np.ndarray:
        """Bring a matrix from the originally given block order to canonical layout."""
        m = np.asarray(m)
        if m.shape != (self.total_dim, self.total_dim):
            raise InputError(
                f"matrix shape {m.shape} does not match structure dimension {self.total_dim}"
            )
        p = np.asarray(self.permutation)
        return m[np.ix_(p, p)]


@dataclass(frozen=True)
class ReducedStructure:
    """All-real, all-full block partition; scalars expanded to 1x1 blocks.

    ``origin_map[k]`` is the index of the canonical source block that reduced
    block ``k`` came from.
    """

    sizes: tuple[int, ...]
    origin_map: tuple[int, ...]

    def __post_init__(self):
        if not self.sizes:
            raise InputError("reduced structure must contain at least one block")
        if any(s < 1 for s in self.sizes):
            raise InputError("reduced block sizes must be positive")
        if len(self.origin_map) != len(self.sizes):
            raise InputError("origin_map length must match the number of reduced blocks")

    @classmethod
    def from_sizes(cls, sizes) -> "ReducedStructure":
        sizes = tuple(int(s) for s in sizes)
        return cls(sizes=sizes, origin_map=tuple(range(len(sizes))))

    @property
    def total_dim(self) -> int:
        return sum(self.sizes)

    @property
    def boundaries(self) -> np.ndarray:
        """Start offsets of every block, plus the total dimension at the end."""
        return np.concatenate(([0], np.cumsum(self.sizes)))

    def slices(self) -> list[slice]:
        b = self.boundaries
        return [slice(int(b[k]), int(b[k + 1])) for k in range(len(self.sizes))]

    def coordinate_blocks(self) -> np.ndarray:
        """Block index of every coordinate."""
        return np.repeat(np.arange(len(self.sizes)), self.sizes)


def _coerce_spec(entry) -> BlockSpec:
    if isinstance(entry, BlockSpec):
        return entry
    if isinstance(entry, dict):
        unknown = set(entry) - {"kind", "size", "field"}
        if unknown:
            raise InputError(f"unknown block keys {sorted(unknown)}")
        return BlockSpec(entry["kind"], int(entry["size"]), entry.get("field", "real"))
    if isinstance(entry, (tuple, list)):
        if len(entry) == 2:
            return BlockSpec(entry[0], int(entry[1]))
        if len(entry) == 3:
            return BlockSpec(entry[0], int(entry[1]), entry[2])
    raise InputError(f"cannot interpret block spec {entry!r}")


def validate_structure(blocks) -> BlockStructure:
    """Check a block list and return it in canonical (full-first) order.

    Parameters
    ----------
    blocks : sequence of BlockSpec, dict or tuple
        Blocks in the order matching the caller's matrix layout.

    Returns
    -------
    BlockStructure
        Canonically ordered structure with the coordinate permutation that
        maps canonical positions back to the given order.
    """
    specs = [_coerce_spec(b) for b in blocks]
    if not specs:
        raise InputError("structure must contain at least one block")

    order = [i for i, s in enumerate(specs) if s.kind == "full"]
    order += [i for i, s in enumerate(specs) if s.kind == "scalar"]

    offsets = np.concatenate(([0], np.cumsum([s.size for s in specs])))
    perm: list[int] = []
    for i in order:
        perm.extend(range(int(offsets[i]), int(offsets[i] + specs[i].size)))

    return BlockStructure(
        blocks=tuple(specs[i] for i in order),
        permutation=tuple(perm),
        block_order=tuple(order),
    )


def reduce_structure(s: BlockStructure) -> ReducedStructure:
    """Drop complex flags and expand each repeated scalar of size m into m 1x1 blocks.

    Valid as an equivalent description of the perturbation set only when the
    interconnection matrix is entrywise nonnegative; callers gate on that.
    """
    if not isinstance(s, BlockStructure):
        raise InputError(f"expected BlockStructure, got {type(s).__name__}")
    sizes: list[int] = []
    origin: list[int] = []
    for k, b in enumerate(s.blocks):
        if b.kind == "full":
            sizes.append(b.size)
            origin.append(k)
        else:
            sizes.extend([1] * b.size)
            origin.extend([k] * b.size)
    return ReducedStructure(sizes=tuple(sizes), origin_map=tuple(origin))


def _as_reduced(s) -> ReducedStructure:
    if isinstance(s, ReducedStructure):
        return s
    if isinstance(s, BlockStructure):
        return reduce_structure(s)
    raise InputError(f"expected a block structure, got {type(s).__name__}")


@dataclass(frozen=True, eq=False)
class StructuredPerturbation:
    """Block-diagonal perturbation tied to a structure.

    Blocks of a repeated-scalar source must be scalar multiples of the
    identity; real-field blocks must be real.  Entries may be negative or
    complex where the field allows; nonnegativity is a property of particular
    constructions (witnesses, dyad ascent), not of the type.
    """

    structure: BlockStructure | ReducedStructure
    blocks: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        if isinstance(self.structure, BlockStructure):
            sizes = self.structure.sizes
            specs = self.structure.blocks
        elif isinstance(self.structure, ReducedStructure):
            sizes = self.structure.sizes
            specs = None
        else:
            raise InputError(f"unsupported structure type {type(self.structure).__name__}")
        if len(self.blocks) != len(sizes):
            raise InputError(
                f"{len(self.blocks)} blocks given for a structure with {len(sizes)}"
            )
        frozen = []
        for k, blk in enumerate(self.blocks):
            b = np.atleast_2d(np.asarray(blk))
            if b.shape != (sizes[k], sizes[k]):
                raise InputError(
                    f"block {k} has shape {b.shape}, expected {(sizes[k], sizes[k])}"
                )
            if not np.all(np.isfinite(np.abs(b))):
                raise InputError(f"block {k} contains non-finite entries")
            if specs is not None:
                spec = specs[k]
                if spec.field == "real":
                    if np.iscomplexobj(b):
                        if np.any(np.abs(b.imag) > 0):
                            raise InputError(f"block {k} is complex but its field is real")
                        b = b.real
                if spec.kind == "scalar" and spec.size > 1:
                    delta = b.flat[0]
                    if np.max(np.abs(b - delta * np.eye(spec.size))) > 1e-12 * (1 + abs(delta)):
                        raise InputError(
                            f"block {k} must be a scalar multiple of the identity"
                        )
            b = b.copy()
            b.setflags(write=False)
            frozen.append(b)
        object.__setattr__(self, "blocks", tuple(frozen))

    def assemble(self) -> np.ndarray:
        """Place the blocks on the diagonal of a full matrix."""
        n = sum(b.shape[0] for b in self.blocks)
        dtype = complex if any(np.iscomplexobj(b) for b in self.blocks) else float
        out = np.zeros((n, n), dtype=dtype)
        pos = 0
        for b in self.blocks:
            s = b.shape[0]
            out[pos : pos + s, pos : pos + s] = b
            pos += s
        return out

    def norm(self) -> float:
        return block_norm(self)


def assemble(d: StructuredPerturbation) -> np.ndarray:
    return d.assemble()


def disassemble(m: np.ndarray, s) -> StructuredPerturbation:
    """Split a block-diagonal matrix back into structured blocks.

    Rejects matrices with support off the block diagonal.
    """
    m = np.atleast_2d(np.asarray(m))
    if isinstance(s, BlockStructure):
        sizes = s.sizes
    else:
        sizes = _as_reduced(s).sizes
    n = sum(sizes)
    if m.shape != (n, n):
        raise InputError(f"matrix shape {m.shape} does not match structure dimension {n}")
    mask = np.ones((n, n), dtype=bool)
    pos = 0
    blocks = []
    for sz in sizes:
        blocks.append(m[pos : pos + sz, pos : pos + sz])
        mask[pos : pos + sz, pos : pos + sz] = False
        pos += sz
    if np.any(np.abs(m[mask]) > 0):
        raise InputError("matrix has support off the block diagonal")
    return StructuredPerturbation(structure=s, blocks=tuple(blocks))


def block_norm(d: StructuredPerturbation) -> float:
    """Largest singular value over the blocks (= the norm of the assembled matrix)."""
    return max(float(np.linalg.norm(b, 2)) for b in d.blocks)


def dyad_interpolant(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Nonnegative rank-one map sending p to q, of norm ||q||/||p|| <= 1.

    Parameters
    ----------
    p, q : array_like
        Entrywise nonnegative vectors of equal length with ||q|| <= ||p||,
        p nonzero.

    Returns
    -------
    ndarray
        The matrix q p^T / ||p||^2.
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise InputError(f"p and q must have equal length, got {p.size} and {q.size}")
    if np.any(p < 0) or np.any(q < 0):
        raise InputError("p and q must be entrywise nonnegative")
    np_norm = float(np.linalg.norm(p))
    nq_norm = float(np.linalg.norm(q))
    if np_norm == 0.0:
        raise InputError("p must be nonzero")
    if nq_norm > np_norm * (1 + 1e-12):
        raise InputError(
            f"no unit-norm-bounded map sends p to q: ||q|| = {nq_norm:.6g} exceeds ||p|| = {np_norm:.6g}"
        )
    return np.outer(q, p) / (np_norm * np_norm)


def _validate_nonneg_matrix(m: np.ndarray, dim: int | None = None) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise InputError(f"matrix dimension {m.shape[0]} does not match structure dimension {dim}")
    if not np.all(np.isfinite(m)):
        raise InputError("matrix contains non-finite entries")
    if np.any(m < 0):
        i, j = np.unravel_index(int(np.argmin(m)), m.shape)
        raise InputError(f"matrix must be entrywise nonnegative; entry ({i},{j}) = {m[i, j]:.6g}")
    return m


def nonnegative_witness(
    m: np.ndarray, d: StructuredPerturbation
) -> tuple[StructuredPerturbation, np.ndarray]:
    """Convert any marginal perturbation into a nonnegative one with a fixed vector.

    Given nonnegative ``m`` and a unit-ball perturbation ``d`` with
    ``rho(m @ d) >= 1``, replaces every full block by its entrywise modulus
    and every repeated scalar by the largest scalar modulus, then divides by
    the Perron root so the loop matrix has spectral radius one.  Returns the
    scaled perturbation together with a nonnegative unit vector q satisfying
    q = m @ d_tilde @ q.

    Full blocks of size above one are expected to be (near) rank-one, as the
    ascent oracle produces; the entrywise modulus of a higher-rank signed
    block can exceed the block's norm, in which case the norm postcondition
    fails and a NumericalFailure is raised.
    """
    if not isinstance(d, StructuredPerturbation):
        raise InputError("d must be a StructuredPerturbation")
    m = _validate_nonneg_matrix(m, dim=sum(b.shape[0] for b in d.blocks))

    if block_norm(d) > 1 + 1e-9:
        raise InputError(f"d must lie in the unit ball; norm = {block_norm(d):.6g}")
    rho_in = float(np.max(np.abs(np.linalg.eigvals(m @ d.assemble()))))
    if rho_in < 1 - 1e-9:
        raise InputError(f"rho(m @ d) = {rho_in:.6g} < 1; no marginal witness exists")

    if isinstance(d.structure, BlockStructure):
        specs = d.structure.blocks
    else:
        specs = None

    scalar_mods = [
        abs(complex(blk.flat[0]))
        for k, blk in enumerate(d.blocks)
        if specs is not None and specs[k].kind == "scalar"
    ]
    delta_bar = max(scalar_mods) if scalar_mods else 0.0

    bar_blocks = []
    for k, blk in enumerate(d.blocks):
        if specs is not None and specs[k].kind == "scalar":
            bar_blocks.append(delta_bar * np.eye(blk.shape[0]))
        else:
            bar_blocks.append(np.abs(blk).astype(float))

    d_bar = StructuredPerturbation(structure=d.structure, blocks=tuple(bar_blocks))
    lam = max(_linalg.perron_root(m @ d_bar.assemble()), 1.0)

    d_tilde = StructuredPerturbation(
        structure=d.structure, blocks=tuple(b / lam for b in d_bar.blocks)
    )
    if block_norm(d_tilde) > 1 + 1e-12:
        raise NumericalFailure(
            "witness norm exceeds one; a full block's entrywise modulus inflated its "
            "norm (block is not rank-one)"
        )

    loop = m @ d_tilde.assemble()
    q = _linalg.perron_vector(loop)
    resid = float(np.linalg.norm(q - loop @ q))
    if resid > 1e-9:
        raise NumericalFailure(f"fixed-vector residual {resid:.3e} exceeds 1e-9")
    return d_tilde, q


def lift_witness(s: BlockStructure, d: StructuredPerturbation) -> StructuredPerturbation:
    """Map a reduced-structure witness to an admissible original perturbation.

    Full blocks carry over unchanged; the independent scalar values that a
    repeated-scalar block was expanded into are replaced by their maximum
    modulus times the identity.  The result dominates the reduced witness
    entrywise, so against a nonnegative matrix its loop spectral radius can
    only grow.
    """
    if not isinstance(s, BlockStructure):
        raise InputError(f"expected BlockStructure, got {type(s).__name__}")
    red = reduce_structure(s)
    if not isinstance(d.structure, ReducedStructure) or d.structure.sizes != red.sizes:
        raise InputError("witness structure does not match the reduction of s")
    blocks: list[np.ndarray] = []
    pos = 0
    for k, spec in enumerate(s.blocks):
        if spec.kind == "full":
            blocks.append(np.asarray(d.blocks[pos]).real.astype(float))
            pos += 1
        else:
            vals = [abs(complex(np.asarray(d.blocks[pos + j]).flat[0])) for j in range(spec.size)]
            blocks.append(max(vals) * np.eye(spec.size))
            pos += spec.size
    return StructuredPerturbation(structure=s, blocks=tuple(blocks))


def sample_boundary(
    s, rng: np.random.Generator, mode: str = "mixed"
) -> StructuredPerturbation:
    """Draw a random perturbation on the unit-ball boundary of a structure.

    Full blocks are rank-one dyads scaled to norm one; repeated scalars get a
    unit-modulus scalar.  ``mode='nonneg'`` restricts to entrywise nonnegative
    real draws, ``mode='mixed'`` draws signed entries and, where a block's
    field allows, complex ones.
    """
    if mode not in ("nonneg", "mixed"):
        raise InputError(f"unknown sampling mode {mode!r}")
    if isinstance(s, BlockStructure):
        entries = [(b.kind, b.size, b.field) for b in s.blocks]
    elif isinstance(s, ReducedStructure):
        entries = [("full", sz, "real") for sz in s.sizes]
    else:
        raise InputError(f"expected a block structure, got {type(s).__name__}")

    blocks = []
    for kind, size, fld in entries:
        use_complex = mode == "mixed" and fld == "complex"
        if kind == "scalar":
            if use_complex:
                delta = np.exp(1j * rng.uniform(0, 2 * np.pi))
            elif mode == "mixed":
                delta = float(rng.choice([-1.0, 1.0]))
            else:
                delta = 1.0
            blocks.append(delta * np.eye(size))
            continue
        if use_complex:
            xi = rng.standard_normal(size) + 1j * rng.standard_normal(size)
            zeta = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        elif mode == "mixed":
            xi = rng.standard_normal(size)
            zeta = rng.standard_normal(size)
        else:
            xi = np.abs(rng.standard_normal(size))
            zeta = np.abs(rng.standard_normal(size))
        nx = np.linalg.norm(xi)
        nz = np.linalg.norm(zeta)
        if nx == 0 or nz == 0:
            xi = np.ones(size)
            zeta = np.ones(size)
            nx = nz = np.sqrt(size)
        blocks.append(np.outer(xi / nx, np.conj(zeta) / nz))
    return StructuredPerturbation(structure=s, blocks=tuple(blocks))
