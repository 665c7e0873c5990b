"""Problem container, text serialization, and certificate verification.

A conic problem is

    min  c'x   s.t.  A x = b,   h - G x in K,

where K is a Cartesian product of the cones in :mod:`conipm.cones`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cones import CONE_TYPES, Cone, GenPower, GeoMean, Lmi, LinfEpi, LogPersp, Nonneg, \
    PowerMean, PsdSvec, SqrEpi, L2Epi, WsosDualScalar
from .errors import DimensionError, ParseError

# Statuses a solve (or preprocessing) can report.
OPTIMAL = "Optimal"
PRIMAL_INFEASIBLE = "PrimalInfeasible"
DUAL_INFEASIBLE = "DualInfeasible"
ILL_POSED = "IllPosed"
STALLED = "Stalled"


@dataclass
class ConicModel:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cones: list[Cone]

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def p(self) -> int:
        return len(self.b)

    @property
    def q(self) -> int:
        return len(self.h)

    def cone_offsets(self) -> list[int]:
        offs, pos = [], 0
        for cone in self.cones:
            offs.append(pos)
            pos += cone.dim
        return offs

    def validate(self) -> None:
        if self.A.shape != (self.p, self.n):
            raise DimensionError(f"A has shape {self.A.shape}, expected ({self.p}, {self.n})")
        if self.G.shape != (self.q, self.n):
            raise DimensionError(f"G has shape {self.G.shape}, expected ({self.q}, {self.n})")
        total = sum(cone.dim for cone in self.cones)
        if total != self.q:
            raise DimensionError(f"cone dims sum to {total}, but G has {self.q} rows")


def build_model(c, A, b, G, h, cones) -> ConicModel:
    """Assemble and validate a conic model from raw arrays."""
    c = np.ascontiguousarray(c, dtype=float).reshape(-1)
    b = np.ascontiguousarray(b, dtype=float).reshape(-1)
    h = np.ascontiguousarray(h, dtype=float).reshape(-1)
    A = np.ascontiguousarray(A, dtype=float).reshape(len(b), -1) if np.size(A) else \
        np.zeros((len(b), len(c)))
    G = np.ascontiguousarray(G, dtype=float).reshape(len(h), -1)
    model = ConicModel(c, A, b, G, h, list(cones))
    model.validate()
    return model


@dataclass
class CertificateReport:
    """Per-inequality residual breakdown for a claimed terminal status."""

    status: str
    checks: dict[str, float] = field(default_factory=dict)  # name -> residual
    limits: dict[str, float] = field(default_factory=dict)  # name -> allowed bound
    valid: bool = True

    def record(self, name: str, value: float, bound: float) -> None:
        self.checks[name] = float(value)
        self.limits[name] = float(bound)
        if not (value <= bound):
            self.valid = False


def verify_certificate(model: ConicModel, status: str, witness: dict,
                       eps_feas: float, eps_inf: float) -> CertificateReport:
    """Recompute every residual backing a terminal claim from original data.

    ``witness`` holds original-space vectors: x, y, z, s (as applicable).
    """
    rep = CertificateReport(status)
    c, A, b, G, h = model.c, model.A, model.b, model.G, model.h
    inf = lambda v: float(np.max(np.abs(v))) if np.size(v) else 0.0

    if status == OPTIMAL:
        x, y, z, s = witness["x"], witness["y"], witness["z"], witness["s"]
        rep.record("dual_eq", inf(A.T @ y + G.T @ z + c), eps_feas * (1.0 + inf(c)))
        rep.record("primal_eq", inf(A @ x - b), eps_feas * (1.0 + inf(b)))
        rep.record("primal_cone_eq", inf(G @ x + s - h), eps_feas * (1.0 + inf(h)))
        pobj, dobj = float(c @ x), float(-b @ y - h @ z)
        gap_scale = max(1.0, min(abs(pobj), abs(dobj)))
        rep.record("gap", abs(pobj - dobj), eps_feas * gap_scale)
    elif status == PRIMAL_INFEASIBLE:
        y, z = witness["y"], witness["z"]
        ray = -(float(b @ y) + float(h @ z))
        rep.record("ray_improvement", 0.0 if ray > 0 else np.inf, 0.0)
        rep.record("dual_eq_ray", inf(A.T @ y + G.T @ z), eps_inf * ray)
    elif status == DUAL_INFEASIBLE:
        x, s = witness["x"], witness["s"]
        ray = -float(c @ x)
        rep.record("ray_improvement", 0.0 if ray > 0 else np.inf, 0.0)
        rep.record("primal_eq_ray", inf(A @ x), eps_inf * ray)
        rep.record("primal_cone_ray", inf(G @ x + s), eps_inf * ray)
    else:
        rep.valid = False
    return rep


# ---------------------------------------------------------------------------
# Text format
#
# Line-oriented, whitespace-separated, floats written with 17 significant
# digits so serialization round-trips bitwise.  Layout:
#
#   CONIPM 1
#   DIMS n p q
#   C          (one line, n floats)
#   A DENSE|SPARSE ...
#   B          (p floats)
#   G DENSE|SPARSE ...
#   H          (q floats)
#   CONE TAG params... [DUAL]
#   [MAT r c + r rows, for matrix-valued cone parameters]

_FMT = "{:.17g}"


def _fmt_vec(v) -> str:
    return " ".join(_FMT.format(x) for x in v)


def _emit_matrix(lines: list[str], name: str, mat: np.ndarray) -> None:
    rows, cols = mat.shape
    nnz = int(np.count_nonzero(mat))
    if rows * cols > 0 and nnz < 0.25 * rows * cols:
        lines.append(f"{name} SPARSE {rows} {cols} {nnz}")
        for i, j in zip(*np.nonzero(mat)):
            lines.append(f"{i} {j} " + _FMT.format(mat[i, j]))
    else:
        lines.append(f"{name} DENSE {rows} {cols}")
        for i in range(rows):
            lines.append(_fmt_vec(mat[i]))


def _cone_lines(cone: Cone) -> list[str]:
    dual = " DUAL" if cone.use_dual else ""
    if isinstance(cone, Nonneg):
        return [f"CONE NONNEG {cone.dim}{dual}"]
    if isinstance(cone, PsdSvec):
        return [f"CONE PSD {cone.side}{dual}"]
    if isinstance(cone, LinfEpi):
        return [f"CONE LINF {cone.d}{dual}"]
    if isinstance(cone, L2Epi):
        return [f"CONE L2 {cone.dim - 1}{dual}"]
    if isinstance(cone, SqrEpi):
        return [f"CONE SQR {cone.dim - 2}{dual}"]
    if isinstance(cone, GenPower):
        return [f"CONE GPOWER {cone.r} {cone.d} " + _fmt_vec(cone.alpha) + dual]
    if isinstance(cone, GeoMean):
        return [f"CONE GEOM {cone.d}{dual}"]
    if isinstance(cone, PowerMean):
        return [f"CONE POWER {cone.d} " + _fmt_vec(cone.alpha) + dual]
    if isinstance(cone, LogPersp):
        return [f"CONE LOG {cone.d}{dual}"]
    if isinstance(cone, Lmi):
        out = [f"CONE LMI {cone.dim} {cone.side}{dual}"]
        for m in cone.mats:
            _emit_matrix(out, "MAT", m)
        return out
    if isinstance(cone, WsosDualScalar):
        out = [f"CONE WSOS {cone.dim} {len(cone.mats)}{dual}"]
        for m in cone.mats:
            _emit_matrix(out, "MAT", m)
        return out
    raise ParseError(f"cannot serialize cone {cone!r}")


def serialize_model(model: ConicModel) -> str:
    model.validate()
    lines = ["CONIPM 1", f"DIMS {model.n} {model.p} {model.q}"]
    lines.append("C " + _fmt_vec(model.c))
    _emit_matrix(lines, "A", model.A)
    lines.append("B " + _fmt_vec(model.b))
    _emit_matrix(lines, "G", model.G)
    lines.append("H " + _fmt_vec(model.h))
    for cone in model.cones:
        lines.extend(_cone_lines(cone))
    return "\n".join(lines) + "\n"


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self) -> list[str]:
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line and not line.startswith("#"):
                return line.split()
        raise ParseError(f"line {self.pos + 1}: unexpected end of file")

    def peek(self) -> list[str] | None:
        save = self.pos
        try:
            tok = self.next()
        except ParseError:
            return None
        self.pos = save
        return tok

    def fail(self, msg: str):
        raise ParseError(f"line {self.pos}: {msg}")


def _read_floats(tokens: list[str], rd: _Reader, count: int, what: str) -> np.ndarray:
    if len(tokens) != count:
        rd.fail(f"{what}: expected {count} values, got {len(tokens)}")
    try:
        return np.array([float(t) for t in tokens])
    except ValueError:
        rd.fail(f"{what}: bad float")


def _read_matrix(rd: _Reader, name: str) -> np.ndarray:
    tok = rd.next()
    if tok[0] != name:
        rd.fail(f"expected {name} matrix, got {tok[0]!r}")
    kind = tok[1]
    rows, cols = int(tok[2]), int(tok[3])
    mat = np.zeros((rows, cols))
    if kind == "DENSE":
        for i in range(rows):
            mat[i] = _read_floats(rd.next(), rd, cols, f"{name} row {i}")
    elif kind == "SPARSE":
        for _ in range(int(tok[4])):
            ent = rd.next()
            if len(ent) != 3:
                rd.fail(f"{name}: sparse entry needs 'i j value'")
            mat[int(ent[0]), int(ent[1])] = float(ent[2])
    else:
        rd.fail(f"{name}: unknown matrix encoding {kind!r}")
    return mat


def _parse_cone(tok: list[str], rd: _Reader) -> Cone:
    tag = tok[1]
    dual = tok[-1] == "DUAL"
    args = tok[2 : len(tok) - 1 if dual else len(tok)]
    if tag not in CONE_TYPES:
        rd.fail(f"unknown cone tag {tag!r}")
    try:
        if tag in ("NONNEG", "PSD", "LINF", "L2", "SQR", "GEOM", "LOG"):
            return CONE_TYPES[tag](int(args[0]), use_dual=dual)
        if tag == "GPOWER":
            r, d = int(args[0]), int(args[1])
            alpha = _read_floats(args[2:], rd, r, "GPOWER alpha")
            return GenPower(alpha, d, use_dual=dual)
        if tag == "POWER":
            d = int(args[0])
            alpha = _read_floats(args[1:], rd, d, "POWER alpha")
            return PowerMean(alpha, use_dual=dual)
        if tag == "LMI":
            count = int(args[0])
            mats = [_read_matrix(rd, "MAT") for _ in range(count)]
            return Lmi(mats, use_dual=dual)
        if tag == "WSOS":
            count = int(args[1])
            mats = [_read_matrix(rd, "MAT") for _ in range(count)]
            return WsosDualScalar(mats, use_dual=dual)
    except (ValueError, IndexError) as exc:
        rd.fail(f"bad {tag} cone parameters: {exc}")
    raise AssertionError("unreachable")


def deserialize_model(text: str) -> ConicModel:
    rd = _Reader(text)
    tok = rd.next()
    if tok[:2] != ["CONIPM", "1"]:
        rd.fail("missing 'CONIPM 1' header")
    tok = rd.next()
    if tok[0] != "DIMS" or len(tok) != 4:
        rd.fail("expected 'DIMS n p q'")
    n, p, q = (int(t) for t in tok[1:])
    tok = rd.next()
    if tok[0] != "C":
        rd.fail("expected C line")
    c = _read_floats(tok[1:], rd, n, "C")
    a_mat = _read_matrix(rd, "A")
    tok = rd.next()
    if tok[0] != "B":
        rd.fail("expected B line")
    b = _read_floats(tok[1:], rd, p, "B")
    g_mat = _read_matrix(rd, "G")
    tok = rd.next()
    if tok[0] != "H":
        rd.fail("expected H line")
    h = _read_floats(tok[1:], rd, q, "H")
    cones = []
    while rd.peek() is not None:
        tok = rd.next()
        if tok[0] != "CONE":
            rd.fail(f"expected CONE line, got {tok[0]!r}")
        cones.append(_parse_cone(tok, rd))
    model = ConicModel(c, a_mat, b, g_mat, h, cones)
    try:
        model.validate()
    except DimensionError as exc:
        raise ParseError(str(exc)) from None
    return model
