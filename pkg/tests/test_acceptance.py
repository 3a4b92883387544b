"""Acceptance suite: one check per release criterion, one report line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see every line.
"""

import math
import time

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import minimize_scalar
from scipy.stats import binom

import chainforge as cf
from conftest import DESIGN_DELTA, ENGINEERED8_T0, SQRT185, build_design
from oracles import project_single_flip, register_hamiltonian, single_flip_indices


def report(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" — {detail}"
    print(line)
    assert ok, line


def test_criterion_1_engineered8_regression(engineered8):
    tic = time.perf_counter()
    dec = cf.eigendecompose(cf.build_hamiltonian(engineered8))
    ref = SQRT185 * np.array([10, 6, 2, 1, -1, -2, -6, -10], dtype=float)
    spectrum_err = float(np.max(np.abs(dec.eigenvalues - ref) / np.abs(ref)))
    amp = np.zeros(8)
    amp[0], amp[2] = 3 * math.sqrt(7.0), 8 * math.sqrt(10.0)
    state = cf.SingleExcitationState.normalized(amp)
    evolved = cf.propagate(engineered8, state, ENGINEERED8_T0)
    arrived = float(np.linalg.norm(evolved.amplitudes[5:]) ** 2)
    elapsed = time.perf_counter() - tic
    report(
        "criterion 1: 8-site benchmark spectrum and encoded transfer",
        spectrum_err <= 1e-12 and 1.0 - arrived <= 1e-12 and elapsed < 0.1,
        f"spectrum rel err {spectrum_err:.2e}, 1-F {1 - arrived:.2e}, {elapsed * 1e3:.1f} ms",
    )


def test_criterion_2_four_site_extension_regression():
    tic = time.perf_counter()
    problem = cf.ExtensionProblem(
        central=cf.uniform_chain(4),
        extension_size=2,
        junction=None,
        targets=((1.0, "+"), (2.0, "+")),
        field_free=True,
    )
    sol = cf.solve_extension(problem)
    elapsed = time.perf_counter() - tic
    err_j1 = abs(sol.extension.couplings[0] - 1.0)
    err_j = abs(sol.junction - math.sqrt(1.5))
    report(
        "criterion 2: 4-site central extension solves exactly",
        err_j1 <= 1e-10 and err_j <= 1e-10 and elapsed < 0.1,
        f"|J1-1| {err_j1:.2e}, |J-sqrt(3/2)| {err_j:.2e}, {elapsed * 1e3:.1f} ms",
    )


def test_criterion_3_design124_encoded_transfer():
    tic = time.perf_counter()
    sol = build_design(42)
    spectral = sol.max_spectral_residual
    dec = cf.eigendecompose(cf.build_hamiltonian(sol.assembled))
    cls = cf.classify_eigenvalues(dec, DESIGN_DELTA)
    enc = cf.null_space_encoding(
        sol.assembled, cf.RegionPartition(124, 42, 42), cls
    )
    worst_error = float(np.max(1.0 - enc.fidelities))
    elapsed = time.perf_counter() - tic
    report(
        "criterion 3: 40->124 design pins 84 eigenvalues and transfers at t=94.5",
        spectral <= 1e-8 * DESIGN_DELTA and worst_error <= 1e-8 and elapsed < 10.0,
        f"spectral residual {spectral:.2e} (tol {1e-8 * DESIGN_DELTA:.2e}), "
        f"worst 1-F {worst_error:.2e}, null dim {enc.null_dimension}, {elapsed:.2f} s",
    )


def test_criterion_4_extension_length_tradeoff():
    errors = {}
    for m in (2, 4, 6, 8, 10, 12):
        sol = build_design(m)
        part = cf.RegionPartition(sol.assembled.n_sites, m, m)
        fid, _, _ = cf.transfer_fidelity(sol.assembled, part, 94.5)
        errors[m] = 1.0 - fid
    decreasing = all(errors[a] > errors[b] for a, b in zip((2, 4, 6, 8, 10), (4, 6, 8, 10, 12)))

    uniform = cf.uniform_chain(56)
    part = cf.RegionPartition(56, 8, 8)
    grid = np.linspace(10.0, 120.0, 1101)
    sweep = cf.fidelity_sweep(uniform, part, grid)
    i = int(np.argmax(sweep.fidelities))
    res = minimize_scalar(
        lambda t: 1.0 - cf.transfer_fidelity(uniform, part, t)[0],
        bounds=(grid[i - 1], grid[i + 1]),
        method="bounded",
        options={"xatol": 1e-10},
    )
    uniform_error = float(res.fun)
    report(
        "criterion 4: error falls with extension length; uniform comparison",
        decreasing and errors[8] <= 1e-7 and 1e-5 <= uniform_error <= 1e-3,
        f"errors {[f'{errors[m]:.1e}' for m in (2, 4, 6, 8, 10, 12)]}, "
        f"uniform {uniform_error:.2e}",
    )


def test_criterion_5_bound_chain(design124):
    fid, _, _ = cf.transfer_fidelity(
        design124.assembled, cf.RegionPartition(124, 1, 1), 94.5
    )
    measured = 1.0 - fid
    integral, closed = cf.endtoend_error_bound(124)
    chain_ok = measured <= integral <= closed

    ratios = []
    for n in (60, 90, 124):
        intg, _ = cf.endtoend_error_bound(n)
        halfwidth = math.sqrt(n - 1) * math.sqrt(n) / 6.0
        k = np.arange(n)
        outside = np.abs(k - (n - 1) / 2.0) > halfwidth
        exact = 2.0 * float(np.sum(binom.pmf(k[outside], n - 1, 0.5)))
        ratios.append(max(intg / exact, exact / intg))
    report(
        "criterion 5: measured error <= integral <= closed form; tail agreement",
        chain_ok and all(r <= 2.0 for r in ratios),
        f"measured {measured:.2e} <= {integral:.2e} <= {closed:.2e}, "
        f"tail/integral factors {[f'{r:.2f}' for r in ratios]}",
    )


def test_criterion_6_roundtrip_reconstruction():
    rng = np.random.default_rng(101)
    worst = 0.0
    for trial in range(200):
        m = int(rng.integers(1, 13))
        couplings = rng.uniform(0.3, 2.0, m - 1)
        fields = rng.uniform(-1.0, 1.0, m) if trial % 2 else np.zeros(m)
        mat = cf.JacobiMatrix(fields, couplings)
        q, p = cf.char_poly_coeffs(mat)
        rec_c, rec_f, _ = cf.reconstruct_chain(cf.RationalFunction(p, q))
        err_c = float(np.max(np.abs(rec_c - couplings))) if m > 1 else 0.0
        err_f = float(np.max(np.abs(rec_f - fields)))
        worst = max(worst, err_c, err_f)
    report(
        "criterion 6: 200 random chains survive char-poly round trip",
        worst <= 1e-8,
        f"max coupling/field error {worst:.2e}",
    )


def test_criterion_7_folding_interlacing():
    rng = np.random.default_rng(202)
    worst = 0.0
    alternating = True
    for _ in range(100):
        n = 2 * int(rng.integers(2, 31))
        half = rng.uniform(0.4, 1.6, n // 2)
        couplings = np.concatenate([half[:-1], half[::-1]])
        fh = rng.uniform(-0.8, 0.8, n // 2)
        fields = np.concatenate([fh, fh[::-1]])
        spec = cf.ChainSpec(couplings, fields)
        dec = cf.eigendecompose(cf.build_hamiltonian(spec))
        plus, minus = cf.fold_symmetric(spec)
        union = np.sort(
            np.concatenate(
                [
                    cf.eigendecompose(plus).eigenvalues,
                    cf.eigendecompose(minus).eigenvalues,
                ]
            )
        )[::-1]
        scale = max(float(np.max(np.abs(dec.eigenvalues))), 1.0)
        worst = max(worst, float(np.max(np.abs(union - dec.eigenvalues))) / scale)
        labels = dec.symmetry_labels
        alternating = alternating and all(
            a != b for a, b in zip(labels, labels[1:])
        )
    report(
        "criterion 7: folded spectra unite to the full spectrum, labels alternate",
        worst <= 1e-10 and alternating,
        f"max union residual {worst:.2e} (relative)",
    )


def test_criterion_8_wavepacket_exactness():
    n = 20
    spec = cf.make_pst_chain(n, 0.5)
    t0 = cf.pst_transfer_time(0.5)
    start = cf.SingleExcitationState.from_site(n, 0)
    sites = np.arange(1, n + 1)
    worst_dist = 0.0
    worst_moment = 0.0
    for t in np.linspace(0.05, 2.0, 20) * t0:
        st = cf.propagate(spec, start, t)
        stats = cf.wavepacket_stats(n, t, t0)
        worst_dist = max(
            worst_dist, float(np.max(np.abs(st.site_probabilities - stats.distribution)))
        )
        mean = float(sites @ st.site_probabilities)
        spread = math.sqrt(float((sites - mean) ** 2 @ st.site_probabilities))
        worst_moment = max(
            worst_moment, abs(mean - stats.mean), abs(spread - stats.spread)
        )
    report(
        "criterion 8: evolved site distribution is exactly binomial",
        worst_dist <= 1e-10 and worst_moment <= 1e-9,
        f"distribution err {worst_dist:.2e}, moment err {worst_moment:.2e}",
    )


def test_criterion_9_creation_suite(design124):
    chain = design124.assembled
    bulk = np.arange(42, 62)  # first 20 of the 40 central sites
    out = np.arange(62, 124)  # mirror half of the centre plus the far extension
    values = cf.creation_spectrum(chain, bulk, out, 94.5)
    in_range = bool(np.all(values >= 0.0) and np.all(values <= 1.0))

    dec = cf.eigendecompose(cf.build_hamiltonian(chain))
    phases = np.exp(1j * dec.eigenvalues * 94.5)
    window = (dec.eigenvectors[out] * phases) @ dec.eigenvectors[bulk].T
    _, vecs = np.linalg.eigh(window.conj().T @ window)
    amp = np.zeros(124, dtype=complex)
    amp[bulk] = vecs[:, -1]
    target = cf.SingleExcitationState.normalized(amp)
    _, top_fid = cf.best_creation_state(chain, target, bulk, out, 94.5)
    top_matches = abs(top_fid - values[0]) <= 1e-10

    count = int(np.sum(values > 1.0 - 1e-6))
    report(
        "criterion 9: creation spectrum suite",
        in_range and top_matches and count >= 10,
        f"range ok {in_range}, |top fid - top eig| {abs(top_fid - values[0]):.1e}, "
        f"{count} eigenvalues > 1-1e-6 (errors {[f'{1 - v:.1e}' for v in values[:9]]})",
    )


def test_criterion_10_dense_register_dynamics():
    rng = np.random.default_rng(77)
    worst = 0.0
    for n in range(3, 9):
        spec = cf.ChainSpec(rng.uniform(0.5, 1.5, n - 1), rng.uniform(-0.5, 0.5, n))
        full, offset = register_hamiltonian(spec.couplings, spec.fields)
        idx = single_flip_indices(n)
        dec = cf.eigendecompose(cf.build_hamiltonian(spec))
        for t in (0.7, 2.3):
            u_full = expm(-1j * full * t)
            block = u_full[np.ix_(idx, idx)]
            phases = np.exp(-1j * dec.eigenvalues * t)
            u_chain = (dec.eigenvectors * phases) @ dec.eigenvectors.T
            worst = max(
                worst,
                float(np.max(np.abs(block - np.exp(-1j * offset * t) * u_chain))),
            )
    report(
        "criterion 10: dynamics match the full-register oracle",
        worst <= 1e-10,
        f"max propagator deviation {worst:.2e}",
    )
