"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line."""
import time

import numpy as np

from sea_dyn.bloch import density_to_bloch, positive_by_coeffs, quartic_roots_of, qutrit_roots
from sea_dyn.composite import (
    CompositeState,
    analytic_separable_case,
    bell_diagonal,
    bell_eigenvalues,
    integrate_composite,
    local_dissipator,
    no_signaling_check,
    product_state,
    qubit_hamiltonian,
)
from sea_dyn.errors import SignalDetected
from sea_dyn.linalg import DensityMatrix, partial_trace, random_density, random_hermitian, spectral_decompose
from sea_dyn.qwalk import cycle_graph, entropy_production, hamiltonian, sea_walk
from sea_dyn.sea import (
    PAULI,
    ConstraintSet,
    SeaConfig,
    compute_multipliers,
    entropy,
    equatorial_qubit,
    gpb_solution,
    integrate,
    qubit_bloch,
    qubit_state,
)

from conftest import rotate


def sig(v):
    return np.tensordot(np.asarray(v, dtype=float), PAULI, axes=1)


def test_c1_gpb_oracle(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for eps in (0.3, 0.9, 0.999):
        for tau in (0.5, 1.0, 5.0):
            rho0, cs = equatorial_qubit(eps, omega=1.0)
            ts = np.linspace(0, 10 * tau, 201)
            traj = integrate(rho0, cs, SeaConfig(tau, ts))
            r_num = np.array([np.linalg.norm(qubit_bloch(s)) for s in traj.states])
            worst = max(worst, float(np.max(np.abs(r_num - gpb_solution(eps, tau, ts)))))
    wall = time.perf_counter() - t0
    verdict(1, worst < 1e-6 and wall < 5.0, f"max |r_num - r_gpb| = {worst:.2e} (< 1e-6), {wall:.2f}s (< 5s)")


def test_c2_equilibrium_multipliers(verdict):
    t0 = time.perf_counter()
    worst_i = worst_h = 0.0
    for n in (30, 50):
        h = hamiltonian(cycle_graph(n))
        for tau in (0.5, 2.0):
            tr = sea_walk(h, 0.99, SeaConfig(tau, [0.0, 5 * tau, 20 * tau]))
            m = compute_multipliers(tr.states[-1], h.constraints())
            worst_i = max(worst_i, abs(m.beta_I + np.log(n)))
            worst_h = max(worst_h, abs(m.beta_H))
    wall = time.perf_counter() - t0
    ok = worst_i < 1e-4 and worst_h < 1e-4 and wall < 30.0
    verdict(2, ok, f"|beta_I + ln N| = {worst_i:.2e}, |beta_H| = {worst_h:.2e} at t = 20 tau (< 1e-4), {wall:.2f}s (< 30s)")


def test_c3_flm_fidelity(verdict):
    # frozen-multiplier reference: equilibrium when relaxation completes
    # within the window, the initial state when it barely starts
    cases = ((0.2, "equilibrium", 5e-4), (50.11, "initial", 5e-3), (100.02, "initial", 5e-3))
    t0 = time.perf_counter()
    h = hamiltonian(cycle_graph(100))
    parts, ok = [], True
    for tau, ref, bound in cases:
        conf = SeaConfig(tau, [0.0, 20.0])
        p_num = sea_walk(h, 0.99, conf, "num").probabilities[-1]
        p_flm = sea_walk(h, 0.99, conf, "flm", reference=ref).probabilities[-1]
        gap = float(np.max(np.abs(p_flm - p_num)))
        ok &= gap < bound
        parts.append(f"tau={tau} ({ref}) gap={gap:.2e} {'<' if gap < bound else '>='} {bound:g}")
    wall = time.perf_counter() - t0
    ok &= wall < 60.0
    verdict(3, ok, "; ".join(parts) + f"; {wall:.2f}s (< 60s)")


def test_c4_conservation_and_monotonicity(verdict):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    d_tr = d_e = drop = 0.0
    rank_ok = True
    for _ in range(50):
        n = int(rng.integers(2, 17))
        rank = int(rng.integers(1, n + 1))
        h = random_hermitian(n, rng) * rng.uniform(0.2, 3.0)
        rho0 = random_density(n, rng, rank=rank)
        tau = float(rng.uniform(0.2, 3.0))
        traj = integrate(rho0, ConstraintSet.from_hamiltonian(h), SeaConfig(tau, np.linspace(0, 3 * tau, 13), rk_tol=1e-10))
        e0 = np.trace(rho0 @ h).real
        hn = np.linalg.norm(h, 2)
        for s in traj.states:
            d_tr = max(d_tr, abs(np.trace(s.matrix).real - 1))
            d_e = max(d_e, abs(np.trace(s.matrix @ h).real - e0) / hn)
            rank_ok &= s.rank == rank
        s_out = [entropy(s) for s in traj.states]
        drop = max(drop, traj.max_entropy_drop, float(np.max(-np.diff(s_out), initial=0.0)))
    wall = time.perf_counter() - t0
    ok = d_tr < 1e-10 and d_e < 1e-7 and drop <= 1e-9 and rank_ok and wall < 60.0
    verdict(4, ok, f"|dTr| = {d_tr:.1e}, |dE|/|H| = {d_e:.1e}, max entropy drop/step = {drop:.1e}, "
                   f"rank constant = {rank_ok}, {wall:.2f}s (< 60s)")


def test_c5_entropy_production_peak(verdict):
    h = hamiltonian(cycle_graph(100))
    cs = h.constraints()
    tau = 0.2
    ts = np.linspace(0, 0.1, 51)[:-1]  # t < 0.1
    tr = sea_walk(h, 0.99, SeaConfig(tau, ts))
    pis = np.array([entropy_production(s, cs, tau) for s in tr.states])
    peak, t_peak = float(pis.max()), float(ts[int(np.argmax(pis))])
    # five-point central differences of S(t)
    dt = 1e-4
    fd_err = 0.0
    for tc in (0.02, 0.05, 0.09, 0.5):
        grid = [0.0] + list(tc + dt * np.arange(-2, 3))
        w = sea_walk(h, 0.99, SeaConfig(tau, grid, rk_tol=1e-12))
        s = [entropy(x) for x in w.states[1:]]
        fd = (s[0] - 8 * s[1] + 8 * s[3] - s[4]) / (12 * dt)
        fd_err = max(fd_err, abs(fd - entropy_production(w.states[3], cs, tau)))
    ok = 25 <= peak <= 40 and fd_err < 1e-5
    verdict(5, ok, f"peak Pi_S = {peak:.2f} at t = {t_peak:.3f} (in [25, 40]); |Pi_S - dS/dt| = {fd_err:.1e} (< 1e-5)")


def _random_bell_vector(rng):
    while True:
        b = rng.uniform(-1, 1, 3)
        if bell_eigenvalues(*b).min() >= 0:
            return b


def test_c6_bloch_root_oracles(verdict):
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    err = {}

    def spectrum(m):
        return spectral_decompose(m)[0]

    e = 0.0
    for _ in range(1000):
        r = rng.uniform(0, 1)
        rho = rotate([(1 + 2 * r) / 3, (1 - r) / 3, (1 - r) / 3], rng)
        lam = qutrit_roots(density_to_bloch(rho).r, rho)
        e = max(e, float(np.max(np.abs(np.array(lam) - spectrum(rho)))))
    err["N=3"] = e
    for name, make in (
        ("class-1", lambda a: [(1 + 3 * a) / 4] + [(1 - a) / 4] * 3),
        ("class-2", lambda a: [(1 + a) / 4] * 2 + [(1 - a) / 4] * 2),
    ):
        lo = -1 / 3 if name == "class-1" else -1.0
        e = 0.0
        for _ in range(1000):
            rho = rotate(make(rng.uniform(lo, 1)), rng)
            lam, _ = quartic_roots_of(rho)
            e = max(e, float(np.max(np.abs(np.sort(lam)[::-1] - spectrum(rho)))))
        err[name] = e
    e = 0.0
    for _ in range(1000):
        b = _random_bell_vector(rng)
        m = bell_diagonal(*b).rho.matrix
        ref = spectrum(m)
        lam_q, _ = quartic_roots_of(m)
        e = max(e, float(np.max(np.abs(np.sort(bell_eigenvalues(*b))[::-1] - ref))),
                float(np.max(np.abs(np.sort(lam_q)[::-1] - ref))))
    err["Bell"] = e
    agree = 0
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        x = random_hermitian(n, rng)
        x -= np.trace(x).real / n * np.eye(n)
        m = np.eye(n) / n + rng.uniform(0, 0.5) * x / np.linalg.norm(x)
        agree += positive_by_coeffs(m) == (np.linalg.eigvalsh(m).min() >= -1e-10)
    wall = time.perf_counter() - t0
    ok = max(err.values()) < 1e-8 and agree == 1000 and wall < 20.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in err.items())
    verdict(6, ok, f"root errors {detail} (< 1e-8); positivity agreement {agree}/1000; {wall:.2f}s (< 20s)")


def test_c7_composite_closed_forms(verdict):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    omega_a, omega_b, tau_a, tau_b = 1.2, 0.8, 0.7, 1.3
    h_a = np.array([0.3, -0.2, 1.0])
    hv = h_a / np.linalg.norm(h_a)
    worst_sep = 0.0
    for mu in np.linspace(0.0, 1.0, 10):
        for phi in np.linspace(0, 2 * np.pi, 10, endpoint=False):
            r_a = 0.8 * np.array([np.cos(phi), np.sin(phi), 0.0])
            case = analytic_separable_case(r_a, mu, omega_a, omega_b, h_a, (0, 0, 1), tau_a, tau_b)
            rb = mu * r_a
            r = np.linalg.norm(rb)
            r_e = hv @ rb
            if r > 0:
                lr = np.log((1 + r) / (1 - r))
                diff = r * lr - lr / r
            else:
                diff = -2.0
            expect_a = diff / (4 * tau_a * (1 - r_e**2)) * sig(r_e * hv - rb)
            da = local_dissipator(case.state, "A", tau_a).anticommutator_form
            db = local_dissipator(case.state, "B", tau_b).anticommutator_form
            worst_sep = max(worst_sep, float(np.max(np.abs(da - expect_a))), float(np.max(np.abs(db))))
    worst_bell = 0.0
    for _ in range(50):
        b = _random_bell_vector(rng)
        st_ = bell_diagonal(*b, omega_a, omega_b, rng.standard_normal(3), rng.standard_normal(3))
        for j, tau in (("A", tau_a), ("B", tau_b)):
            worst_bell = max(worst_bell, float(np.max(np.abs(local_dissipator(st_, j, tau).anticommutator_form))))
    wall = time.perf_counter() - t0
    ok = worst_sep < 1e-8 and worst_bell < 1e-8 and wall < 30.0
    verdict(7, ok, f"separable grid 10x10 max err {worst_sep:.1e}, Bell x50 max |{{F,rho}}| {worst_bell:.1e} (< 1e-8); {wall:.2f}s (< 30s)")


def test_c8_no_signaling_harness(verdict):
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    h_a = qubit_hamiltonian(1.1, (0.2, 0.5, 1.0))
    h_b = qubit_hamiltonian(0.7, (1.0, -0.3, 0.4))
    states = {
        "Bell-diagonal": bell_diagonal(-0.6, 0.3, 0.1, 1.1, 0.7, (0.2, 0.5, 1.0), (1.0, -0.3, 0.4)),
        "separable-mixed": analytic_separable_case([0.6, 0.3, 0.0], 0.7, 1.1, 0.7, (0.2, 0.5, 1.0), (1.0, -0.3, 0.4)).state,
        "random correlated": CompositeState(DensityMatrix(random_density(4, rng)), h_a, h_b),
    }
    parts, ok = [], True
    for k, (name, st_) in enumerate(states.items()):
        rep = no_signaling_check(st_, trials=100, seed=800 + k, tau_a=0.9, tau_b=1.4, raise_on_fail=False)
        ok &= rep.passed
        parts.append(f"{name} {'pass' if rep.passed else 'FAIL'} (a {rep.max_state_dev:.0e}, b {rep.max_perception_dev:.0e}, c {rep.max_rhs_dev:.0e})")
    # negative control: sign flip on beta^A_1 must be caught
    caught = 0
    for k in range(10):
        st_ = CompositeState(DensityMatrix(random_density(4, rng)), h_a, h_b)
        try:
            no_signaling_check(st_, trials=100, seed=900 + k, tau_a=0.9, tau_b=1.4, corrupt_beta_a1=True)
        except SignalDetected as exc:
            caught += exc.check == "c"
    ok &= caught == 10
    wall = time.perf_counter() - t0
    ok &= wall < 60.0
    verdict(8, ok, "; ".join(parts) + f"; negative control detected {caught}/10; {wall:.2f}s (< 60s)")


def test_c9_product_state_factorization(verdict):
    rng = np.random.default_rng(9)
    worst_prod = worst_red = 0.0
    for _ in range(20):
        h_a, h_b = random_hermitian(2, rng), random_hermitian(2, rng)
        ra = qubit_state(rng.uniform(0.2, 0.95) * _unit(rng))
        rb = qubit_state(rng.uniform(0.2, 0.95) * _unit(rng))
        tau_a, tau_b = rng.uniform(0.3, 2.0, 2)
        t_end = 5 * max(tau_a, tau_b)
        grid = np.linspace(0, t_end, 11)
        st_ = product_state(ra, rb, h_a, h_b)
        traj = integrate_composite(st_, tau_a, grid, tau_b=tau_b, rk_tol=1e-10)
        sa = integrate(ra, ConstraintSet.from_hamiltonian(h_a), SeaConfig(tau_a, grid, rk_tol=1e-10))
        sb = integrate(rb, ConstraintSet.from_hamiltonian(h_b), SeaConfig(tau_b, grid, rk_tol=1e-10))
        for s, a, b in zip(traj.states, sa.states, sb.states):
            m = s.matrix
            pa, pb = partial_trace(m, (2, 2), "A"), partial_trace(m, (2, 2), "B")
            worst_prod = max(worst_prod, float(np.linalg.norm(m - np.kron(pa, pb))))
            worst_red = max(worst_red, float(np.max(np.abs(pa - a.matrix))), float(np.max(np.abs(pb - b.matrix))))
    ok = worst_prod < 1e-7 and worst_red < 1e-8
    verdict(9, ok, f"max ||rho - rho_A x rho_B||_F = {worst_prod:.1e} (< 1e-7); reduced vs standalone {worst_red:.1e} (< 1e-8)")


def _unit(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)
