"""Agreement instances and the checks that define (bounded) lattice agreement."""

from __future__ import annotations

from dataclasses import dataclass, field

from .checks import compute_D, compute_Dprime, compute_gamma, compute_M
from .lattice import (
    ELEMENT_LIMIT,
    Distance,
    LatticeError,
    LatticeTooLarge,
    QuasiMetric,
    dist_le,
)


@dataclass(frozen=True)
class AgreementInstance:
    """Inputs, base outputs and (optionally) reconciled outputs of ``n``
    processes. Process ``i`` is index ``i`` (0-based) in each tuple."""

    inputs: tuple
    outputs: tuple
    reconciled: tuple | None = None
    crashed: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if self.reconciled is not None:
            object.__setattr__(self, "reconciled", tuple(self.reconciled))
            if len(self.reconciled) != len(self.inputs):
                raise ValueError("reconciled outputs must have one value per process")
        object.__setattr__(self, "crashed", frozenset(self.crashed))
        if len(self.inputs) != len(self.outputs):
            raise ValueError("inputs and outputs must have the same length")
        if any(not 0 <= i < len(self.inputs) for i in self.crashed):
            raise ValueError("crashed index out of range")

    @property
    def n(self) -> int:
        return len(self.inputs)

    @property
    def correct(self) -> list[int]:
        return [i for i in range(self.n) if i not in self.crashed]

    def correct_values(self, reconciled: bool = False) -> list:
        vals = self.reconciled if reconciled else self.outputs
        if vals is None:
            raise ValueError("instance has no reconciled outputs")
        return [vals[i] for i in self.correct]


@dataclass(frozen=True)
class InstanceReport:
    downward_validity: bool
    upward_validity: bool
    comparability: bool
    tightness: bool
    dv_witness: int | None = None
    uv_witness: int | None = None
    comparability_witness: tuple[int, int] | None = None
    tightness_witness: tuple[int, int] | None = None

    @property
    def valid(self) -> bool:
        """Downward-validity, upward-validity and comparability all hold."""
        return self.downward_validity and self.upward_validity and self.comparability

    @property
    def ok(self) -> bool:
        return self.valid and self.tightness


def check_instance(
    inst: AgreementInstance,
    qm: QuasiMetric,
    epsilon: Distance,
    *,
    reconciled: bool = False,
) -> InstanceReport:
    """Evaluate DV, UV, comparability and epsilon-tightness over correct processes.

    With ``reconciled=True`` the reconciled outputs are checked against the
    same inputs. Witnesses are process indices; the tightness witness is
    an ordered pair ``(i, j)`` with ``y_i <= y_j``.
    """
    if epsilon is None:
        raise LatticeError("epsilon must be defined")
    lat = qm.lattice
    ys = inst.reconciled if reconciled else inst.outputs
    if ys is None:
        raise ValueError("instance has no reconciled outputs")
    correct = inst.correct
    top = lat.join_all(inst.inputs)

    dv = next((i for i in correct if not lat.leq(inst.inputs[i], ys[i])), None)
    uv = next((i for i in correct if not lat.leq(ys[i], top)), None)

    comp = None
    tight = None
    for a, i in enumerate(correct):
        for j in correct[a + 1 :]:
            if lat.leq(ys[i], ys[j]):
                lo, hi = i, j
            elif lat.leq(ys[j], ys[i]):
                lo, hi = j, i
            else:
                comp = comp or (i, j)
                continue
            if tight is None and not dist_le(qm.delta(ys[lo], ys[hi]), epsilon):
                tight = (lo, hi)

    return InstanceReport(
        downward_validity=dv is None,
        upward_validity=uv is None,
        comparability=comp is None,
        tightness=tight is None,
        dv_witness=dv,
        uv_witness=uv,
        comparability_witness=comp,
        tightness_witness=tight,
    )


@dataclass(frozen=True)
class ComplianceReport:
    gamma: Distance
    D: Distance | None
    Dprime: Distance
    M: Distance | None
    gamma_reconciled: Distance | None = None

    @property
    def improved(self) -> bool | None:
        if self.gamma_reconciled is None:
            return None
        return self.gamma_reconciled < self.gamma


def compliance_report(
    inst: AgreementInstance,
    qm: QuasiMetric,
    limit: int = ELEMENT_LIMIT,
) -> ComplianceReport:
    """Compliance of the outputs (and reconciled outputs) plus the D, D' and M
    bounds. D and M are left as None when the lattice is too large to
    enumerate."""
    gamma = compute_gamma(inst.correct_values(), qm)
    gamma_r = None
    if inst.reconciled is not None:
        gamma_r = compute_gamma(inst.correct_values(reconciled=True), qm)
    dprime = compute_Dprime(inst.inputs, qm)
    try:
        D = compute_D(inst.inputs, qm, limit)
        M = compute_M(qm)
    except LatticeTooLarge:
        D = M = None
    if D is not None and not dist_le(dprime, D):
        raise AssertionError(f"D'={dprime!r} exceeds D={D!r}")
    return ComplianceReport(gamma=gamma, D=D, Dprime=dprime, M=M, gamma_reconciled=gamma_r)

