"""Single-excitation-subspace Hamiltonians for spin rings and chains.

A network of N spins with uniform coupling J, restricted to the subspace
with exactly one excited spin, is described by a real symmetric N x N
matrix: the couplings sit on the off-diagonal (nearest neighbours, plus
the (1, N) closure for a ring) and the static control biases Delta_n sit
on the diagonal. Parametric model error enters as a structured direction:
a single diagonal entry (bias uncertainty, scaled by the local field
strength) or a symmetric off-diagonal pair (coupling uncertainty, unit
scale).

Spins are 1-indexed everywhere in this module's public interface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .synthesis import Controller

TOPOLOGIES = ("ring", "chain")

BIAS = "bias"
COUPLING = "coupling"
CONTROL_FIELD = "control_field"
UNITY = "unity"


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NetworkSpec:
    """Static description of a spin network and its transfer task.

    The ZZ coupling strength ``kappa`` is carried for interface
    completeness but must be zero: the single-excitation diagonal
    convention for a nonzero ZZ term is not fixed here, so nonzero
    values are rejected at validation instead of silently guessed.
    """

    num_spins: int
    topology: str
    input_spin: int
    output_spin: int
    coupling: float = 1.0
    kappa: float = 0.0

    def __post_init__(self):
        n = self.num_spins
        if n < 2:
            raise ValueError(f"need at least 2 spins, got {n}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if self.topology == "ring" and n < 3:
            raise ValueError("a ring needs at least 3 spins; the (1, N) closure of a "
                             "2-ring would duplicate the (1, 2) edge")
        for name, spin in (("input_spin", self.input_spin), ("output_spin", self.output_spin)):
            if not 1 <= spin <= n:
                raise ValueError(f"{name} must be in 1..{n}, got {spin}")
        if self.input_spin == self.output_spin:
            raise ValueError("input and output spins must differ")
        if not self.coupling > 0:
            raise ValueError(f"coupling must be positive, got {self.coupling}")
        if self.kappa != 0.0:
            raise ValueError("nonzero ZZ coupling is not supported (kappa must be 0)")

    @property
    def coupling_pairs(self) -> tuple[tuple[int, int], ...]:
        """Coupled spin pairs, 1-indexed: (k, k+1) ascending, ring closure (1, N) last."""
        pairs = [(k, k + 1) for k in range(1, self.num_spins)]
        if self.topology == "ring":
            pairs.append((1, self.num_spins))
        return tuple(pairs)

    def to_json(self) -> str:
        doc = {
            "n": self.num_spins,
            "topology": self.topology,
            "j": self.coupling,
            "in": self.input_spin,
            "out": self.output_spin,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        doc = json.loads(text)
        try:
            return cls(
                num_spins=int(doc["n"]),
                topology=doc["topology"],
                input_spin=int(doc["in"]),
                output_spin=int(doc["out"]),
                coupling=float(doc.get("j", 1.0)),
                kappa=float(doc.get("kappa", 0.0)),
            )
        except KeyError as exc:
            raise ValueError(f"network document is missing key {exc}") from exc


@dataclass(frozen=True)
class SESHamiltonian:
    """Controlled single-excitation Hamiltonian: couplings plus bias diagonal."""

    matrix: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        _readonly(self.matrix)
        _readonly(self.biases)


@dataclass(frozen=True)
class UncertaintyStructure:
    """One direction of structured Hamiltonian uncertainty.

    ``sites`` holds the affected spin (bias kind) or spin pair (coupling
    kind), 1-indexed. The matrix is Hermitian with unit nonzero entries;
    the physical perturbation is ``delta * f * matrix`` where the scale f
    follows ``scaling_rule``.
    """

    index: int
    kind: str
    sites: tuple[int, ...]
    matrix: np.ndarray
    scaling_rule: str

    def __post_init__(self):
        _readonly(self.matrix)


def build_hamiltonian(spec: NetworkSpec, biases: np.ndarray) -> SESHamiltonian:
    """Assemble the controlled Hamiltonian for ``spec`` with the given bias diagonal.

    Off-diagonal entries are assigned symmetrically, so the result is
    bitwise symmetric.
    """
    n = spec.num_spins
    biases = np.asarray(biases, dtype=float)
    if biases.shape != (n,):
        raise ValueError(f"expected {n} biases, got shape {biases.shape}")
    h = np.zeros((n, n))
    j = spec.coupling
    for a, b in spec.coupling_pairs:
        h[a - 1, b - 1] = j
        h[b - 1, a - 1] = j
    h[np.diag_indices(n)] = biases
    return SESHamiltonian(matrix=h, biases=biases.copy())


def enumerate_structures(spec: NetworkSpec) -> list[UncertaintyStructure]:
    """All uncertainty directions for ``spec``, in canonical order.

    Indices 1..N are the bias sites (field-strength scaling); the
    couplings follow, (k, k+1) ascending and the ring closure (1, N)
    last, all with unit scaling.
    """
    n = spec.num_spins
    structures = []
    for site in range(1, n + 1):
        m = np.zeros((n, n))
        m[site - 1, site - 1] = 1.0
        structures.append(UncertaintyStructure(
            index=site, kind=BIAS, sites=(site,), matrix=m, scaling_rule=CONTROL_FIELD))
    for offset, (a, b) in enumerate(spec.coupling_pairs):
        m = np.zeros((n, n))
        m[a - 1, b - 1] = 1.0
        m[b - 1, a - 1] = 1.0
        structures.append(UncertaintyStructure(
            index=n + 1 + offset, kind=COUPLING, sites=(a, b), matrix=m, scaling_rule=UNITY))
    return structures


def scaling_factor(structure: UncertaintyStructure, controller: "Controller") -> float:
    """Perturbation scale f for one structure under one controller.

    Bias uncertainty scales with the magnitude of the local control
    field; coupling uncertainty is unit scale. A zero field gives f = 0,
    which downstream turns into an exactly vanishing sensitivity.
    """
    if structure.scaling_rule == CONTROL_FIELD:
        site = structure.sites[0]
        return abs(float(np.asarray(controller.biases)[site - 1]))
    return 1.0


def perturb(ham: SESHamiltonian, structure: UncertaintyStructure, delta: float,
            controller: "Controller") -> SESHamiltonian:
    """Hamiltonian displaced by ``delta`` along a scaled uncertainty direction."""
    n = ham.matrix.shape[0]
    if structure.matrix.shape != (n, n):
        raise ValueError(f"structure dimension {structure.matrix.shape} does not match "
                         f"Hamiltonian dimension {(n, n)}")
    f = scaling_factor(structure, controller)
    m = ham.matrix + delta * f * structure.matrix
    return SESHamiltonian(matrix=m, biases=np.diag(m).copy())
