"""Numerical verification suite for the sensitivity geometry.

Every check here compares the closed-form machinery against either an
exact structural identity (orthogonality, norm bounds, the |zeta|
factorization) or an independent computational route (Hilbert-space
propagation, quadrature of the integral representation, finite
differences of the re-propagated error). Checks sample randomized
networks and controllers from a seeded generator, so a failure report
always pins the offending instance.

The suite is what `verify` runs from the command line; the acceptance
tests call the same functions with the documented sample sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .analytics import analyze
from .bloch import (adjoint_rep, build_bloch_system, fidelity, gell_mann_basis,
                    site_state, state_to_bloch)
from .geometry import angles, identity_residual, io_operator, project, pst_check
from .network import (NetworkSpec, UncertaintyStructure, build_hamiltonian,
                      enumerate_structures, perturb, scaling_factor)
from .sensitivity import (differential_sensitivity, fd_oracle, propagator_matrix,
                          quadrature_oracle, sensitivity_operator,
                          spectral_decompose)
from .synthesis import Controller, SynthesisConfig, synthesize_ensemble, transfer_fidelity

# Randomized instances live on modest time and bias scales so that the
# finite-difference truncation error and the oscillation budget of the
# fixed-order quadrature both stay far below the agreement tolerances.
INSTANCE_T_RANGE = (0.3, 3.0)
INSTANCE_BIAS_SCALE = 1.0


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one verification check."""

    name: str
    passed: bool
    detail: str
    warning: bool = False

    @property
    def label(self) -> str:
        if self.passed:
            return "WARN" if self.warning else "PASS"
        return "FAIL"


@dataclass(frozen=True)
class Instance:
    """One randomized (controller, structure) pair with derived quantities."""

    spec: NetworkSpec
    controller: Controller
    structure: UncertaintyStructure
    s_bloch: np.ndarray
    tr_phi_k: float
    s_frob: float
    norm_K: float
    zeta: float
    f_n: float
    fidelity: float
    norm_Rs: float
    k_coeff: float
    sin_phi: float
    residual: float


def random_spec(rng: np.random.Generator, n: int) -> NetworkSpec:
    """Random topology and transfer pair for an n-spin network."""
    topology = "ring" if n >= 3 and rng.random() < 0.5 else "chain"
    pair = rng.choice(n, size=2, replace=False) + 1
    return NetworkSpec(num_spins=n, topology=topology,
                       input_spin=int(pair[0]), output_spin=int(pair[1]))


def random_controller(rng: np.random.Generator, spec: NetworkSpec,
                      t_range: tuple[float, float] = INSTANCE_T_RANGE,
                      bias_scale: float = INSTANCE_BIAS_SCALE,
                      index: int = 0) -> Controller:
    """Random working point (not optimized); fidelity filled in honestly."""
    biases = rng.uniform(-bias_scale, bias_scale, spec.num_spins)
    t_f = float(rng.uniform(*t_range))
    f = transfer_fidelity(spec, biases, t_f)
    return Controller(biases=biases, t_f=t_f, fidelity=float(min(1.0, max(0.0, f))),
                      spec=spec, seed=index, index=index)


def sample_instances(seed: int, dims: tuple[int, ...] = (2, 3, 4, 5, 6),
                     systems_per_dim: int = 14) -> list[Instance]:
    """Randomized instance pool shared by the structural checks."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    out: list[Instance] = []
    idx = 0
    for n in dims:
        basis = gell_mann_basis(n)
        for _ in range(systems_per_dim):
            spec = random_spec(rng, n)
            controller = random_controller(rng, spec, index=idx)
            idx += 1
            ham = build_hamiltonian(spec, controller.biases)
            system = build_bloch_system(ham, spec, controller.t_f)
            sd = spectral_decompose(system.A)
            phi = propagator_matrix(sd, controller.t_f)
            f_val, _ = fidelity(system.rf, phi, system.r0)
            r_op = io_operator(system.rf, system.r0)
            for structure in enumerate_structures(spec):
                image = adjoint_rep(structure.matrix, basis)
                op = sensitivity_operator(sd, image, controller.t_f)
                f_n = scaling_factor(structure, controller)
                zeta = differential_sensitivity(system, op, f_n)
                r_s, norm_rs, perp = project(r_op, phi, op)
                _, sin_phi, _ = angles(f_val, zeta, n, norm_rs, op.norm_K,
                                       f_n, controller.t_f, norm_rs_perp=perp)
                out.append(Instance(
                    spec=spec, controller=controller, structure=structure,
                    s_bloch=image,
                    tr_phi_k=float(np.tensordot(phi, op.K, axes=2)),
                    s_frob=float(np.linalg.norm(image)),
                    norm_K=op.norm_K,
                    zeta=zeta,
                    f_n=f_n,
                    fidelity=f_val,
                    norm_Rs=norm_rs,
                    k_coeff=float(np.tensordot(r_op, op.K, axes=2)),
                    sin_phi=sin_phi,
                    residual=identity_residual(zeta, f_n, controller.t_f,
                                               op.norm_K, norm_rs, sin_phi)))
    return out


def check_lemma1(instances: list[Instance]) -> CheckResult:
    """Propagator and sensitivity operator are Frobenius orthogonal."""
    worst = max(abs(i.tr_phi_k) / (1e-9 * i.spec.num_spins ** 2) for i in instances)
    return CheckResult(
        name="lemma1-orthogonality",
        passed=worst <= 1.0,
        detail=f"{len(instances)} instances, worst |tr(Phi^T K)| at "
               f"{worst:.3e} of the 1e-9*N^2 budget")


def check_lemma2(instances: list[Instance]) -> CheckResult:
    """0 < |K| <= |S|_F, with strict positivity at numerical scale."""
    bad = [i for i in instances
           if not (1e-6 < i.norm_K <= i.s_frob + 1e-9)]
    detail = (f"{len(instances)} instances, |K| in "
              f"[{min(i.norm_K for i in instances):.3e}, "
              f"{max(i.norm_K for i in instances):.3e}]")
    if bad:
        i = bad[0]
        detail = (f"{len(bad)} violations; first at controller seed "
                  f"{i.controller.seed} structure {i.structure.index}: "
                  f"|K| = {i.norm_K:.6e}, |S|_F = {i.s_frob:.6e}")
    return CheckResult(name="lemma2-norm-bounds", passed=not bad, detail=detail)


def check_theorem1(instances: list[Instance]) -> CheckResult:
    """|zeta| equals the factored form within 1e-8 * max(1, |zeta|)."""
    worst = max(i.residual / (1e-8 * max(1.0, abs(i.zeta))) for i in instances)
    return CheckResult(
        name="theorem1-identity",
        passed=worst <= 1.0,
        detail=f"{len(instances)} records, worst residual at {worst:.3e} of budget")


def check_remark1(instances: list[Instance]) -> CheckResult:
    """|R_S|^2 decomposes into the two frame coefficients."""
    worst = 0.0
    for i in instances:
        frame_sq = (i.fidelity / i.spec.num_spins) ** 2 + (i.k_coeff / i.norm_K) ** 2
        worst = max(worst, abs(i.norm_Rs ** 2 - frame_sq))
    return CheckResult(
        name="remark1-frame-norm",
        passed=worst <= 1e-10,
        detail=f"worst |R_S|^2 defect {worst:.3e} (limit 1e-10)")


def check_remark2(instances: list[Instance]) -> CheckResult:
    """F/N <= |R_S| always; |R_S| <= 1/N is empirical, failure only warns."""
    lower_bad = [i for i in instances
                 if i.norm_Rs < i.fidelity / i.spec.num_spins - 1e-12]
    upper_bad = [i for i in instances
                 if i.norm_Rs > 1.0 / i.spec.num_spins + 1e-10]
    if lower_bad:
        i = lower_bad[0]
        return CheckResult(
            name="remark2-projection-bounds", passed=False,
            detail=f"lower bound broken at controller seed {i.controller.seed} "
                   f"structure {i.structure.index}: |R_S| = {i.norm_Rs:.12e} "
                   f"< F/N = {i.fidelity / i.spec.num_spins:.12e}")
    if upper_bad:
        dump = "; ".join(
            f"seed {i.controller.seed} structure {i.structure.index} "
            f"|R_S| = {i.norm_Rs:.12e} (1/N = {1.0 / i.spec.num_spins:.6e})"
            for i in upper_bad[:5])
        return CheckResult(
            name="remark2-projection-bounds", passed=True, warning=True,
            detail=f"upper bound exceeded on {len(upper_bad)} instances "
                   f"(observation, not a theorem): {dump}")
    return CheckResult(
        name="remark2-projection-bounds", passed=True,
        detail=f"{len(instances)} instances inside [F/N - 1e-12, 1/N + 1e-10]")


def hilbert_fidelity(spec: NetworkSpec, biases: np.ndarray, t_f: float) -> float:
    """Transfer fidelity straight from the Schroedinger propagator."""
    ham = build_hamiltonian(spec, np.asarray(biases, dtype=float))
    u = expm(-1j * ham.matrix * t_f)
    return float(abs(u[spec.output_spin - 1, spec.input_spin - 1]) ** 2)


def perturbed_error(controller: Controller, structure: UncertaintyStructure,
                    delta: float) -> float:
    """Error of the perturbed Hamiltonian under full re-propagation."""
    spec = controller.spec
    ham = build_hamiltonian(spec, controller.biases)
    tilted = perturb(ham, structure, delta, controller)
    u = expm(-1j * tilted.matrix * controller.t_f)
    amp = u[spec.output_spin - 1, spec.input_spin - 1]
    return float(1.0 - abs(amp) ** 2)


def check_three_way(seed: int, dims: tuple[int, ...] = (2, 3, 4, 5),
                    per_dim: int = 50, h: float = 1e-5) -> CheckResult:
    """Closed form vs quadrature vs finite differences on random instances."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    worst_quad = worst_fd = 0.0
    total = 0
    for n in dims:
        basis = gell_mann_basis(n)
        for k in range(per_dim):
            spec = random_spec(rng, n)
            controller = random_controller(rng, spec, index=k)
            structures = enumerate_structures(spec)
            structure = structures[int(rng.integers(len(structures)))]
            ham = build_hamiltonian(spec, controller.biases)
            system = build_bloch_system(ham, spec, controller.t_f)
            sd = spectral_decompose(system.A)
            image = adjoint_rep(structure.matrix, basis)
            op = sensitivity_operator(sd, image, controller.t_f)
            f_n = scaling_factor(structure, controller)
            zeta = differential_sensitivity(system, op, f_n)
            quad = quadrature_oracle(system.A, image, controller.t_f,
                                     system.r0, system.rf, f_n)
            fd = fd_oracle(lambda st, c, d: perturbed_error(c, st, d),
                           structure, controller, h)
            worst_quad = max(worst_quad,
                             abs(quad - zeta) / max(1e-8 * abs(zeta), 1e-10))
            worst_fd = max(worst_fd,
                           abs(fd - zeta) / max(1e-6 * abs(zeta), 1e-8))
            total += 1
    passed = worst_quad <= 1.0 and worst_fd <= 1.0
    return CheckResult(
        name="three-way-agreement",
        passed=passed,
        detail=f"{total} instances; quadrature at {worst_quad:.3e} and "
               f"finite differences at {worst_fd:.3e} of their budgets")


def check_pst_sufficiency() -> CheckResult:
    """The analytic two-spin perfect transfer point has zero sensitivity."""
    spec = NetworkSpec(num_spins=2, topology="chain", input_spin=1, output_spin=2)
    t_f = math.pi / 2.0
    controller = Controller(biases=np.zeros(2), t_f=t_f,
                            fidelity=transfer_fidelity(spec, np.zeros(2), t_f),
                            spec=spec, seed=0, index=0)
    ham = build_hamiltonian(spec, controller.biases)
    system = build_bloch_system(ham, spec, t_f)
    sd = spectral_decompose(system.A)
    phi = propagator_matrix(sd, t_f)
    if not pst_check(phi, system.r0, system.rf):
        return CheckResult(name="theorem2-sufficiency", passed=False,
                           detail="two-spin point is not perfect transfer")
    f_val, _ = fidelity(system.rf, phi, system.r0)
    r_op = io_operator(system.rf, system.r0)
    basis = gell_mann_basis(2)
    worst_zeta = 0.0
    worst_rs = 0.0
    worst_cos = 0.0
    for structure in enumerate_structures(spec):
        image = adjoint_rep(structure.matrix, basis)
        op = sensitivity_operator(sd, image, t_f)
        f_n = scaling_factor(structure, controller)
        zeta = differential_sensitivity(system, op, f_n)
        # unit scaling probes the bias structures too; on-site biases are 0
        zeta_unit = differential_sensitivity(system, op, 1.0)
        r_s, norm_rs, perp = project(r_op, phi, op)
        cos_phi, _, _ = angles(f_val, zeta, 2, norm_rs, op.norm_K, f_n, t_f,
                               norm_rs_perp=perp)
        worst_zeta = max(worst_zeta, abs(zeta), abs(zeta_unit))
        worst_rs = max(worst_rs, abs(norm_rs - 0.5))
        worst_cos = max(worst_cos, abs(cos_phi - 1.0))
    passed = worst_zeta <= 1e-9 and worst_rs <= 1e-9 and worst_cos <= 1e-9
    return CheckResult(
        name="theorem2-sufficiency",
        passed=passed,
        detail=f"max |zeta| = {worst_zeta:.3e}, |R_S| defect {worst_rs:.3e}, "
               f"cos phi defect {worst_cos:.3e} (limits 1e-9)")


def check_necessity(seed: int, restarts: int = 40,
                    threads: int | None = None) -> CheckResult:
    """Imperfect transfer implies nonzero sensitivity, desk scale.

    On a synthesized ensemble, every record with error inside
    [1e-6, 0.5] and scaling f_n >= 0.1 must show |zeta| >= 1e-12 unless
    its alignment factor sin phi is itself at the zero floor.
    """
    spec = NetworkSpec(num_spins=4, topology="ring", input_spin=1, output_spin=2)
    config = SynthesisConfig(restarts=restarts, seed=seed)
    ensemble = synthesize_ensemble(spec, config, threads=threads)
    records, _ = analyze(ensemble, threads=threads)
    eligible = [r for r in records
                if 1e-6 <= r.e <= 0.5 and r.f_n >= 0.1]
    violations = [r for r in eligible
                  if r.abs_zeta < 1e-12 and r.sin_phi > 1e-8]
    residual_bad = [r for r in records
                    if math.isfinite(r.identity_residual)
                    and r.identity_residual > 1e-8 * max(1.0, r.abs_zeta)]
    passed = not violations and not residual_bad and bool(eligible)
    if violations:
        r = violations[0]
        detail = (f"controller {r.controller_index} structure "
                  f"{r.structure_index}: e = {r.e:.3e} but |zeta| = "
                  f"{r.abs_zeta:.3e} with sin phi = {r.sin_phi:.3e}")
    elif residual_bad:
        r = residual_bad[0]
        detail = (f"identity residual {r.identity_residual:.3e} at controller "
                  f"{r.controller_index} structure {r.structure_index}")
    elif not eligible:
        detail = "no records in the eligible error band; enlarge the ensemble"
    else:
        detail = (f"{len(eligible)} eligible records of {len(records)}, "
                  f"min |zeta| = {min(r.abs_zeta for r in eligible):.3e}")
    return CheckResult(name="theorem2-necessity", passed=passed, detail=detail)


def check_cross_formulation(seed: int, count: int = 100, max_n: int = 6,
                            flip_sign: bool = False) -> CheckResult:
    """Adjoint-picture transfer agrees with Schroedinger propagation.

    Checks both the scalar fidelity and the full propagated state; the
    latter is what catches a flipped generator sign, which the scalar
    cannot see on real Hamiltonians (swapping input and output there
    gives the same transfer probability).
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    dims = [n for n in range(2, max_n + 1)]
    worst_f = worst_state = 0.0
    for k in range(count):
        n = dims[k % len(dims)]
        spec = random_spec(rng, n)
        controller = random_controller(rng, spec, index=k)
        ham = build_hamiltonian(spec, controller.biases)
        system = build_bloch_system(ham, spec, controller.t_f)
        a = -system.A if flip_sign else system.A
        sd = spectral_decompose(a)
        phi = propagator_matrix(sd, controller.t_f)
        f_bloch, _ = fidelity(system.rf, phi, system.r0)
        f_hilbert = hilbert_fidelity(spec, controller.biases, controller.t_f)
        psi_t = expm(-1j * ham.matrix * controller.t_f) @ site_state(n, spec.input_spin)
        r_t = state_to_bloch(psi_t / np.linalg.norm(psi_t), system.basis)
        worst_f = max(worst_f, abs(f_bloch - f_hilbert))
        worst_state = max(worst_state, float(np.linalg.norm(phi @ system.r0 - r_t)))
    passed = worst_f <= 1e-10 and worst_state <= 1e-10
    return CheckResult(
        name="cross-formulation",
        passed=passed,
        detail=f"{count} instances; fidelity gap {worst_f:.3e}, "
               f"state gap {worst_state:.3e} (limits 1e-10)")


def run_checks(seed: int = 2024, dims: tuple[int, ...] = (2, 3, 4, 5, 6),
               systems_per_dim: int = 14, three_way_per_dim: int = 50,
               cross_count: int = 100, necessity_restarts: int = 40,
               pst_only: bool = False, inject_sign_error: bool = False,
               threads: int | None = None) -> list[CheckResult]:
    """The full suite in report order; flags trim or sabotage it for tests."""
    if pst_only:
        return [check_pst_sufficiency()]
    instances = sample_instances(seed, dims=dims, systems_per_dim=systems_per_dim)
    results = [
        check_lemma1(instances),
        check_lemma2(instances),
        check_theorem1(instances),
        check_remark1(instances),
        check_remark2(instances),
        check_pst_sufficiency(),
        check_necessity(seed, restarts=necessity_restarts, threads=threads),
        check_three_way(seed, dims=tuple(n for n in dims if n <= 5),
                        per_dim=three_way_per_dim),
        check_cross_formulation(seed, count=cross_count,
                                max_n=max(dims), flip_sign=inject_sign_error),
    ]
    return results
