"""Protograph LDPC codes: loading, quasi-cyclic lifting, encoding, syndrome checks.

A :class:`Protograph` is a small template graph (base matrix with parallel-edge
multiplicities plus per-column puncture flags).  :func:`lift` expands it into a
:class:`LiftedCode` by replacing every edge with a circulant permutation whose
shift is chosen greedily so the lifted Tanner graph has no length-4 cycles.
Encoding solves the parity system over GF(2) with a precomputed bit-packed
inverse of the parity-column submatrix, so information bits appear verbatim at
designated positions of the codeword.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class ProtographFormatError(ValueError):
    """Raised when a protograph file is malformed or inconsistent."""


class LiftError(ValueError):
    """Raised when a 4-cycle-free circulant assignment cannot be found."""


class EncoderStructureError(ValueError):
    """Raised when the parity-column submatrix is singular for this lift."""


@dataclass(frozen=True, eq=False)
class Protograph:
    """Base matrix with edge multiplicities and per-column puncture flags.

    Rows are check-node types, columns variable-node types; entry (i, j) is
    the number of parallel edges between type-i checks and type-j variables.
    """

    base_matrix: np.ndarray
    puncture_flags: np.ndarray
    design_rate: Fraction

    def __post_init__(self):
        b = np.asarray(self.base_matrix, dtype=np.int64)
        flags = np.asarray(self.puncture_flags, dtype=bool)
        object.__setattr__(self, "base_matrix", b)
        object.__setattr__(self, "puncture_flags", flags)
        if b.ndim != 2:
            raise ProtographFormatError("base matrix must be 2-D")
        if (b < 0).any():
            raise ProtographFormatError("base matrix entries must be >= 0")
        if (b.sum(axis=1) == 0).any():
            raise ProtographFormatError("base matrix has an all-zero row")
        if (b.sum(axis=0) == 0).any():
            raise ProtographFormatError("base matrix has an all-zero column")
        if flags.shape != (b.shape[1],):
            raise ProtographFormatError("puncture flags width mismatch")
        m_b, n_b = b.shape
        n_tx = n_b - int(flags.sum())
        if n_b <= m_b or n_tx <= 0:
            raise ProtographFormatError("degenerate protograph dimensions")
        rate = Fraction(n_b - m_b, n_tx)
        if rate != self.design_rate:
            raise ProtographFormatError(
                f"declared rate {self.design_rate} != computed rate {rate}"
            )

    @property
    def m_b(self) -> int:
        return self.base_matrix.shape[0]

    @property
    def n_b(self) -> int:
        return self.base_matrix.shape[1]

    @property
    def default_parity_types(self) -> list[int]:
        """Preferred parity column types: degree-1 columns, punctured columns,
        then trailing columns until m_b types are collected.

        The lifted encoder tries these first, so information bits normally sit
        on the remaining (well-protected) column types.  Deterministic.
        """
        degs = self.base_matrix.sum(axis=0)
        chosen: list[int] = [j for j in range(self.n_b) if degs[j] == 1]
        chosen += [j for j in range(self.n_b) if self.puncture_flags[j] and j not in chosen]
        for j in range(self.n_b - 1, -1, -1):
            if len(chosen) >= self.m_b:
                break
            if j not in chosen:
                chosen.append(j)
        return sorted(chosen[: self.m_b])


def load_protograph(source: str | Path) -> Protograph:
    """Parse a protograph description file.

    Format: optional '#' comment lines; first data line ``rows cols``; then the
    integer matrix row per line; a ``puncture: f1 .. f_nb`` line of 0/1 flags;
    finally ``rate: r``.  Whitespace separated throughout.
    """
    text = Path(source).read_text()
    tokens_per_line = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            tokens_per_line.append(line)
    if len(tokens_per_line) < 4:
        raise ProtographFormatError("file too short for a protograph description")

    try:
        m_b, n_b = (int(t) for t in tokens_per_line[0].split())
    except ValueError as exc:
        raise ProtographFormatError(f"bad dimension line: {tokens_per_line[0]!r}") from exc
    if m_b < 1 or n_b < 2 or len(tokens_per_line) != 3 + m_b:
        raise ProtographFormatError("line count inconsistent with declared dimensions")

    rows = []
    for line in tokens_per_line[1 : 1 + m_b]:
        try:
            row = [int(t) for t in line.split()]
        except ValueError as exc:
            raise ProtographFormatError(f"non-integer matrix entry in {line!r}") from exc
        if len(row) != n_b:
            raise ProtographFormatError("inconsistent matrix row width")
        rows.append(row)

    punct_line = tokens_per_line[1 + m_b]
    if not punct_line.startswith("puncture:"):
        raise ProtographFormatError("missing 'puncture:' line")
    flags = [int(t) for t in punct_line.split(":", 1)[1].split()]
    if len(flags) != n_b or any(f not in (0, 1) for f in flags):
        raise ProtographFormatError("puncture flags must be 0/1, one per column")

    rate_line = tokens_per_line[2 + m_b]
    if not rate_line.startswith("rate:"):
        raise ProtographFormatError("missing 'rate:' line")
    declared = float(rate_line.split(":", 1)[1])

    n_tx = n_b - sum(flags)
    if n_tx <= 0:
        raise ProtographFormatError("every column punctured")
    computed = Fraction(n_b - m_b, n_tx)
    if abs(declared - float(computed)) > 1e-9:
        raise ProtographFormatError(
            f"declared rate {declared} != computed rate {float(computed):.6f}"
        )
    return Protograph(np.array(rows), np.array(flags, bool), computed)


def bundled_code_path(name: str = "ar3a_rate08.txt") -> Path:
    """Path of a protograph file shipped with the package."""
    return Path(importlib.resources.files("jcncsim") / "data" / name)


# ---------------------------------------------------------------------------
# quasi-cyclic lifting
# ---------------------------------------------------------------------------

def _creates_4cycle(shifts, i, j, s, z, m_b, n_b):
    """Would adding circulant shift s to block (i, j) close a length-4 cycle?

    Cycle conditions over circulant shift arithmetic mod z:
      * same block: two ordered pairs of distinct shifts with equal difference;
      * same row, two columns: equal within-block differences;
      * same column, two rows: equal within-block differences;
      * two rows, two columns: equal cross-block difference sets.
    """
    own = shifts[(i, j)]
    # within-block: all ordered differences must stay distinct
    diffs = set()
    for a in own:
        for b in own:
            if a != b:
                diffs.add((a - b) % z)
    new_diffs = []
    for a in own:
        d1, d2 = (s - a) % z, (a - s) % z
        if d1 in diffs or d2 in diffs or d1 == d2:
            return True
        new_diffs.extend((d1, d2))
    if len(set(new_diffs)) != len(new_diffs):
        return True
    own_diff_after = diffs | set(new_diffs)

    def block_diffs(ii, jj):
        vals = shifts[(ii, jj)]
        return {(a - b) % z for a in vals for b in vals if a != b}

    # same row / same column pairs
    for jj in range(n_b):
        if jj != j and own_diff_after & block_diffs(i, jj):
            return True
    for ii in range(m_b):
        if ii != i and own_diff_after & block_diffs(ii, j):
            return True
    # cross pairs: (S(i,j)+s - S(ii,j)) vs (S(i,jj) - S(ii,jj))
    own_after = own + [s]
    for ii in range(m_b):
        if ii == i or not shifts[(ii, j)]:
            continue
        left = {(a - d) % z for a in own_after for d in shifts[(ii, j)]}
        for jj in range(n_b):
            if jj == j or not shifts[(i, jj)] or not shifts[(ii, jj)]:
                continue
            right = {(b - e) % z for b in shifts[(i, jj)] for e in shifts[(ii, jj)]}
            if left & right:
                return True
    return False


def _assign_shifts(pg: Protograph, z: int, seed: int):
    """Greedy girth-6 circulant shift assignment, deterministic given seed."""
    b = pg.base_matrix
    m_b, n_b = b.shape
    rng = np.random.default_rng(seed)
    for attempt in range(40):
        shifts = {(i, j): [] for i in range(m_b) for j in range(n_b)}
        ok = True
        for i in range(m_b):
            for j in range(n_b):
                for _ in range(b[i, j]):
                    order = rng.permutation(z)
                    for s in order:
                        s = int(s)
                        if s in shifts[(i, j)]:
                            continue
                        if not _creates_4cycle(shifts, i, j, s, z, m_b, n_b):
                            shifts[(i, j)].append(s)
                            break
                    else:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            return shifts
    raise LiftError(
        f"no 4-cycle-free circulant assignment found for lift_factor={z}"
    )


# ---------------------------------------------------------------------------
# GF(2) bit-packed linear algebra for the encoder
# ---------------------------------------------------------------------------

def _pack_rows(dense: np.ndarray) -> np.ndarray:
    """Pack a 0/1 matrix row-wise into uint64 words (little-endian bit order)."""
    n = dense.shape[1]
    nw = (n + 63) // 64
    padded = np.zeros((dense.shape[0], nw * 64), dtype=np.uint8)
    padded[:, :n] = dense
    bits = padded.reshape(dense.shape[0], nw, 64)
    weights = (np.uint64(1) << np.arange(64, dtype=np.uint64))
    return (bits.astype(np.uint64) * weights).sum(axis=2, dtype=np.uint64)


def _gf2_inverse_packed(m_dense: np.ndarray) -> np.ndarray:
    """Inverse of a square 0/1 matrix over GF(2), returned bit-packed by rows."""
    m = m_dense.shape[0]
    rows = _pack_rows(m_dense)
    inv = _pack_rows(np.eye(m, dtype=np.uint8))
    for col in range(m):
        w, bit = col >> 6, np.uint64(1) << np.uint64(col & 63)
        has = (rows[:, w] & bit) != 0
        cand = np.nonzero(has[col:])[0]
        if cand.size == 0:
            raise EncoderStructureError("parity-column submatrix is singular")
        piv = col + int(cand[0])
        if piv != col:
            rows[[col, piv]] = rows[[piv, col]]
            inv[[col, piv]] = inv[[piv, col]]
        sel = (rows[:, w] & bit) != 0
        sel[col] = False
        rows[sel] ^= rows[col]
        inv[sel] ^= inv[col]
    return inv


def _gf2_matvec_packed(packed: np.ndarray, vec_packed: np.ndarray) -> np.ndarray:
    """(packed rows) @ vec over GF(2); returns 0/1 vector of len rows."""
    acc = np.bitwise_and(packed, vec_packed[None, :])
    return (np.bitwise_count(acc).sum(axis=1) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class LiftedCode:
    """Quasi-cyclic lifted LDPC code with an attached systematic encoder.

    ``edge_cn``/``edge_vn`` list the lifted Tanner-graph edges; ``vn_type`` and
    ``cn_type`` map each lifted node back to its protograph column/row type.
    Immutable after construction; safe to share across workers.
    """

    protograph: Protograph
    lift_factor: int
    seed: int
    n: int
    k: int
    p: int
    edge_cn: np.ndarray
    edge_vn: np.ndarray
    puncture_mask_: np.ndarray
    vn_type: np.ndarray
    cn_type: np.ndarray
    info_positions: np.ndarray
    parity_positions: np.ndarray
    h_csr: sp.csr_matrix = field(repr=False)
    _w_packed: np.ndarray = field(repr=False)       # parity = W @ info over GF(2)
    _info_cols_packed_width: int = field(repr=False)

    @property
    def num_checks(self) -> int:
        return self.h_csr.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_cn.shape[0]

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Map k information bits to an n-bit codeword (info at designated positions)."""
        info = np.asarray(info)
        if info.shape != (self.k,):
            raise ValueError(f"info must have exactly {self.k} bits")
        u = info.astype(np.uint8) & 1
        padded = np.zeros(self._info_cols_packed_width * 64, dtype=np.uint8)
        padded[: self.k] = u
        weights = (np.uint64(1) << np.arange(64, dtype=np.uint64))
        u_packed = (
            padded.reshape(self._info_cols_packed_width, 64).astype(np.uint64) * weights
        ).sum(axis=1, dtype=np.uint64)
        parity = _gf2_matvec_packed(self._w_packed, u_packed)
        c = np.empty(self.n, dtype=np.uint8)
        c[self.info_positions] = u
        c[self.parity_positions] = parity
        return c

    def syndrome_check(self, c: np.ndarray) -> bool:
        """True iff every parity check is satisfied."""
        c = np.asarray(c)
        if c.shape != (self.n,):
            raise ValueError(f"codeword must have exactly {self.n} bits")
        syn = self.h_csr.dot(c.astype(np.int64)) & 1
        return not syn.any()

    def puncture_mask(self) -> np.ndarray:
        """Boolean mask, True at punctured (untransmitted) codeword positions."""
        return self.puncture_mask_.copy()


def lift(pg: Protograph, lift_factor: int, seed: int) -> LiftedCode:
    """Lift a protograph into a quasi-cyclic code, deterministic given seed.

    Raises :class:`LiftError` when ``lift_factor`` cannot resolve all parallel
    edges without 4-cycles, and :class:`EncoderStructureError` when the
    preferred parity-column submatrix is singular for the chosen shifts (retry
    with a different seed).
    """
    b = pg.base_matrix
    m_b, n_b = b.shape
    z = int(lift_factor)
    if z < int(b.max()):
        raise LiftError("lift_factor smaller than the largest edge multiplicity")
    shifts = _assign_shifts(pg, z, seed)

    r_base = np.arange(z)
    cns, vns = [], []
    for i in range(m_b):
        for j in range(n_b):
            for s in shifts[(i, j)]:
                cns.append(i * z + r_base)
                vns.append(j * z + (r_base + s) % z)
    edge_cn = np.concatenate(cns).astype(np.int32)
    edge_vn = np.concatenate(vns).astype(np.int32)

    n = n_b * z
    m = m_b * z
    vn_type = (np.arange(n) // z).astype(np.int32)
    cn_type = (np.arange(m) // z).astype(np.int32)
    punct = pg.puncture_flags[vn_type]
    p = int(punct.sum())
    k = n - m

    data = np.ones(edge_cn.shape[0], dtype=np.int8)
    h_csr = sp.csr_matrix((data, (edge_cn, edge_vn)), shape=(m, n))

    parity_types = pg.default_parity_types
    parity_positions = np.concatenate(
        [np.arange(t * z, (t + 1) * z) for t in parity_types]
    ).astype(np.int64)
    info_positions = np.setdiff1d(np.arange(n), parity_positions).astype(np.int64)

    m_sub = np.zeros((m, m), dtype=np.uint8)
    h_coo = h_csr.tocoo()
    col_to_parity = -np.ones(n, dtype=np.int64)
    col_to_parity[parity_positions] = np.arange(m)
    sel = col_to_parity[h_coo.col] >= 0
    m_sub[h_coo.row[sel], col_to_parity[h_coo.col[sel]]] ^= 1
    m_inv = _gf2_inverse_packed(m_sub)

    # W = M^-1 @ H_info, assembled column-by-column from the sparse info columns
    h_csc = h_csr.tocsc()
    m_inv_cols = np.zeros((m, m), dtype=np.uint8)  # unpacked M^-1 columns
    weights_idx = np.arange(m)
    for r in range(m):
        word = m_inv[r, weights_idx >> 6]
        m_inv_cols[r] = (word >> (weights_idx & 63).astype(np.uint64)) & 1
    w_dense = np.zeros((m, k), dtype=np.uint8)
    for out_col, col in enumerate(info_positions):
        start, end = h_csc.indptr[col], h_csc.indptr[col + 1]
        rows_ = h_csc.indices[start:end]
        acc = np.zeros(m, dtype=np.uint8)
        for rr in rows_:
            acc ^= m_inv_cols[:, rr]
        w_dense[:, out_col] = acc
    w_packed = _pack_rows(w_dense)

    code = LiftedCode(
        protograph=pg,
        lift_factor=z,
        seed=seed,
        n=n,
        k=k,
        p=p,
        edge_cn=edge_cn,
        edge_vn=edge_vn,
        puncture_mask_=punct,
        vn_type=vn_type,
        cn_type=cn_type,
        info_positions=info_positions,
        parity_positions=parity_positions,
        h_csr=h_csr,
        _w_packed=w_packed,
        _info_cols_packed_width=(k + 63) // 64,
    )
    return code


def syndrome_check(code: LiftedCode, c: np.ndarray) -> bool:
    return code.syndrome_check(c)


def encode(code: LiftedCode, info: np.ndarray) -> np.ndarray:
    return code.encode(info)


def puncture_mask(code: LiftedCode) -> np.ndarray:
    return code.puncture_mask()
