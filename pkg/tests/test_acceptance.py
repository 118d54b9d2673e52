"""End-to-end acceptance criteria, one test per criterion at its stated tolerance."""
import math
import time

import numpy as np
from scipy.integrate import quad

from cnls_stability import continuation as ct
from cnls_stability import evans as ev
from cnls_stability import melnikov as mk
from cnls_stability import spectral as sp
from cnls_stability import specfun as sf
from cnls_stability.model import ModelParams, beta1_critical, fundamental_profile, uniform_grid

from conftest import rel

S, BETA2, ELL = 4.0, 2.0, 2


def _sech(x):
    e = math.exp(-abs(x))
    return 2 * e / (1 + e * e)


def test_1_pitchforks(report):
    t0 = time.time()
    p = ModelParams(1.0, S, 2.0, BETA2)
    br = ct.continue_branch(fundamental_profile(p), p, (2.0, 22.0))
    found = ct.detect_pitchfork(br, p, (2.0, 22.0))
    want = [3.0, 6.0, 10.0, 15.0, 21.0]
    err = max(abs(a - b) for a, b in zip(found, want)) if len(found) == len(want) else math.inf
    dt = time.time() - t0
    ok = report(1, len(found) == 5 and err <= 1e-6 and dt <= 120,
                f"pitchforks {[round(b, 9) for b in found]}, max error {err:.2e}, {dt:.1f}s")
    assert ok


def test_2_melnikov_cross_validation(report):
    t0 = time.time()
    worst_a = worst_poly = worst_quad = 0.0
    for s in (0.25, 1.0, 4.0, 9.0):
        for ell in range(5):
            a = mk.melnikov_a2(s, ell)
            q = mk.melnikov_a2(s, ell, method="quadrature")
            worst_a = max(worst_a, abs(a - q) / abs(q))
            for beta2 in (-1.0, 0.0, 2.0, 20.0):
                ds = mk.melnikov_b2(s, ell, beta2)
                poly = mk.melnikov_b2(s, ell, beta2, method="polynomial")
                worst_poly = max(worst_poly, abs(ds - poly) / abs(ds))
                bq = mk.melnikov_b2(s, ell, beta2, method="quadrature")
                worst_quad = max(worst_quad, abs(bq - ds) / abs(ds))
    dt = time.time() - t0
    ok = report(2, worst_a <= 1e-8 and worst_poly <= 1e-10 and worst_quad <= 1e-6 and dt <= 300,
                f"a2 closed/quadrature {worst_a:.1e}, b2 sum/polynomial {worst_poly:.1e}, "
                f"b2 quadrature/sum {worst_quad:.1e}, {dt:.1f}s")
    assert ok


def test_3_evans_closed_vs_numeric(report, ctx_fund, p_fund):
    t0 = time.time()
    rng = np.random.default_rng(2024)
    known = [-12j, -5j, 0j, 3j, 12j, 5j, -3j]
    lams = []
    while len(lams) < 200:
        if len(lams) < 170:
            z = complex(rng.uniform(0.02, 2.5), rng.uniform(-14.0, 14.0))
        else:
            # left half-plane between the cuts
            z = complex(rng.uniform(-2.0, -0.02), rng.uniform(-0.95, 0.95))
        if min(abs(z - w) for w in known) > 0.05 and not ev.on_branch_cut(z, 1.0, S, tol=0.02):
            lams.append(z)
    num = ev.evans_grid(ctx_fund, lams)
    worst = max(rel(e, ev.evans_closed_fundamental(z, p_fund).value) for z, e in zip(lams, num))
    dt = time.time() - t0
    ok = report(3, worst <= 1e-6 and dt <= 180, f"200 points, max relative difference {worst:.2e}, {dt:.1f}s")
    assert ok


def test_4_embedded_inventory(report, ctx_fund):
    beta1 = 10.0

    def EB(z):
        return ev.evans_b_closed(ev.nu_values(z, 1.0, S)[3], beta1)

    errs = []
    for target in (-12j, -5j, 0j, 3j):
        z, good = ev.newton_polish(EB, target + 0.05 + 0.05j)
        errs.append(abs(z - target) if good else math.inf)
    pole = ev.classify_point(ctx_fund, 4j, branch_point="+is", gam=0.0)
    chi_integer = abs(ev._chi(beta1) - round(ev._chi(beta1).real)) < 1e-12
    ok = report(4, max(errs) <= 1e-8 and pole.kind is ev.PointKind.RESONANCE_POLE and chi_integer,
                f"E_B zeros -12i,-5i,0,3i max error {max(errs):.1e}; 4i is {pole.kind.value}, "
                f"chi = {ev._chi(beta1).real:g}")
    assert ok


def test_5_instability_onset(report):
    t0 = time.time()
    eps = [0.025, 0.05, 0.1]
    path = sp.trace_eigenvalue(S, ELL, BETA2, -12j, eps)
    re = np.array([z.real for _, z in path])
    near = all(abs(z.imag + 12) < 0.1 for _, z in path)
    slope = float(np.polyfit(np.log(eps), np.log(re), 1)[0]) if np.all(re > 0) else float("nan")
    coeff = sp.perturbation_data(sp.classify_case(-12j, S, ELL, BETA2)).re_coeff
    pred = coeff * 0.05 ** 2
    got = re[1]
    dev = abs(got - pred) / abs(pred)
    dt = time.time() - t0
    ok = report(5, bool(np.all(re > 0)) and near and abs(slope - 2) <= 0.1 and dev <= 0.2 and dt <= 600,
                f"Re lambda {', '.join(f'{r:.3e}' for r in re)}; slope {slope:.4f}; "
                f"eps=0.05 predicted {pred:.4e} found {got:.4e} ({100 * dev:.2f}%), {dt:.1f}s")
    assert ok


def test_6_no_eigenvalue_near_minus_5i(report, ctx_bif):
    # zero-free certificate on the right half of the radius-0.3 box around -5i
    box = ev.Rectangle(1e-6, 0.3, -5.3, -4.7)

    def f(z):
        return ev.evans_eval(ctx_bif, z, x_check=False).value

    n = ev.winding_number(f, box, n=1024)
    rec = sp.classify_case(-5j, S, ELL, BETA2)
    detail = f"winding number {n} on Re in [1e-6, 0.3], Im in [-5.3, -4.7]; -5i classified as Case {rec.case.value}"
    if n:
        z = ev.locate_zeros(ctx_bif, box)
        detail += "; zero(s) at " + ", ".join(f"{w.real:.4e}{w.imag:+.5f}i" for w, _ in z)
    ok = report(6, n == 0, detail)
    assert ok


def test_7_krein_indices(report, bifurcated_005):
    t0 = time.time()
    lines = []
    # fundamental wave below the first pitchfork
    pf = ModelParams(1.0, S, 2.0, BETA2)
    prof = fundamental_profile(pf)
    nm = sp.sturm_negative_count(sp.l_minus(prof, pf)).negative
    npl = sp.sturm_negative_count(sp.l_plus(prof, pf)).negative
    kf = sp.krein_index(nm, npl, sp.d_matrix_fundamental(pf))
    lines.append(f"fundamental K={kf.K_Ham}")
    # bifurcated ell = 0
    prof0, p0 = sp.bifurcated_profile(S, 0, BETA2, 0.05)
    k0 = sp.krein_index(sp.sturm_negative_count(sp.l_minus(prof0, p0)).negative,
                        sp.sturm_negative_count(sp.l_plus(prof0, p0)).negative,
                        sp.d_matrix_bifurcated(S, 0, BETA2))
    lines.append(f"ell=0 K={k0.K_Ham}")
    prof2, p2 = bifurcated_005
    a = sp.sturm_negative_count(sp.l_minus(prof2, p2)).negative
    b = sp.sturm_negative_count(sp.l_plus(prof2, p2)).negative
    k2 = sp.krein_index(a, b, sp.d_matrix_bifurcated(S, ELL, BETA2))
    lines.append(f"ell=2 n(L-)={a} n(L+)={b} n(D)={k2.n_D} K={k2.K_Ham}")
    dt = time.time() - t0
    ok = report(7, kf.K_Ham == 0 and kf.verdict is sp.Verdict.ORBITALLY_STABLE and k0.K_Ham == 0
                and (a, b, k2.n_D, k2.K_Ham) == (2, 3, 1, 4) and dt <= 60,
                "; ".join(lines) + f", {dt:.1f}s")
    assert ok


def _quad_i(ell, mu, nu, s):
    return sp.i_ell_integral(ell, mu, nu, s)


def test_8_closed_forms(report):
    r = math.sqrt(S)
    checks = {}
    nu = ev.nu_values(sp.lambda0(S, -1), 1.0, S)
    checks["(i) s=4 k=-1"] = rel(sp.i_ell_closed_negative_k(S, -1), _quad_i(0, r - 1, nu[1], S))
    for ell in (1, 2):
        nu = ev.nu_values(sp.lambda0(S, ell), 1.0, S)
        checks[f"(ii) s=4 l={ell}"] = rel(sp.i_ell_closed_top(S, ell), _quad_i(ell, r + ell, nu[0], S))
    nu = ev.nu_values(1j, 1.0, 0.64)
    checks["(iii) s=0.64"] = rel(sp.i_ell_closed_endpoint(0.64), _quad_i(0, nu[3], nu[1], 0.64))

    def i2(s):
        nu = ev.nu_values(sp.lambda0(s, -2), 1.0, s)
        return _quad_i(2, math.sqrt(s) - 2, nu[1], s)

    scale = max(abs(i2(6.25)), abs(i2(12.25)))
    vanish = abs(i2(9.0)) / scale
    worst = max(checks.values())
    # the odd-l top formula carries the sign (-1)^((l-1)/2); the opposite sign
    # convention gives the same modulus and the negated value
    nu = ev.nu_values(sp.lambda0(S, 1), 1.0, S)
    q1 = _quad_i(1, r + 1, nu[0], S)
    flipped = -sp.i_ell_closed_top(S, 1)
    print(f"note: opposite odd-l sign convention differs from quadrature by {rel(flipped, q1):.2f} "
          f"(moduli agree to {abs(abs(flipped) - abs(q1)) / abs(q1):.1e})")
    ok = report(8, worst <= 1e-6 and vanish <= 1e-8,
                ", ".join(f"{k} {v:.1e}" for k, v in checks.items())
                + f"; |I2(sqrt s=3)|/scale {vanish:.1e}")
    assert ok


def test_9_property_suite(report, ctx_fund, ctx_bif, p_fund):
    t0 = time.time()
    res = {}
    rng = np.random.default_rng(7)
    pts = [complex(rng.uniform(0.05, 1.5), rng.uniform(-13, 13)) for _ in range(6)]
    res["x-independence"] = max(ev.evans_eval(c, z).x_spread() for c in (ctx_fund, ctx_bif) for z in pts[:3])
    # spectrum symmetric under conjugation everywhere and under -conj inside the gap
    sym = []
    for z in pts[:3]:
        u = ev.evans_eval(ctx_bif, z, x_check=False).value
        sym.append(rel(ev.evans_eval(ctx_bif, z.conjugate(), x_check=False).value, np.conj(u)))
    for z in (0.3 + 0.4j, 0.05 + 0.9j):
        u = ev.evans_eval(ctx_bif, z, x_check=False).value
        sym.append(rel(ev.evans_eval(ctx_bif, -z.conjugate(), x_check=False).value, np.conj(u)))
    res["quadruple symmetry"] = max(sym)
    conj = []
    for z in pts:
        a = ev.evans_closed_fundamental(z, p_fund).factors
        b = ev.evans_closed_fundamental(z.conjugate(), p_fund).factors
        conj += [rel(b[0], np.conj(a[0])), rel(b[1], np.conj(a[2])), rel(b[2], np.conj(a[1]))]
    res["factor conjugation"] = max(conj)
    x = np.linspace(-6, 6, 25)
    wr = []
    for lam in (0.3 + 0.5j, 0.2 - 6.0j):
        J = ev.jost_solutions(ctx_bif, lam, x)
        for j in range(1, 5):
            a, b = J.Y[j], J.Y[j + 4]
            w = np.sum(a[:, 4:] * b[:, :4] - a[:, :4] * b[:, 4:], axis=1)
            wr.append(np.max(np.abs(w - w[12])) / np.max(np.abs(w)))
    res["Wronskian"] = max(wr)
    xg = uniform_grid(30.0, 3001)
    bad = 0
    for s in (0.25, 1.0, 4.0, 9.0):
        for ell in range(5):
            V = mk.v1_profile(s, ell, xg)
            bad += not np.allclose(V, (-1) ** ell * V[::-1], atol=1e-13)
            bad += mk.sign_changes(V, 1e-9) != ell
    kr = []
    for rr in (0.7, 1.5, 3.0, 5.5):
        q = quad(lambda t: 2 * _sech(t) ** rr, 0, 80, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        kr.append(rel(sf.sech_moment(rr), q))
        kr.append(rel(sf.sech_moment(rr + 2), rr / (rr + 1) * sf.sech_moment(rr)))
        for alpha in (0.0, 1.3, 4.0):
            q = quad(lambda t: 2 * _sech(t) ** rr, 0, 80, weight="cos", wvar=alpha,
                     epsabs=1e-13, epsrel=1e-12, limit=400)[0]
            kr.append(abs(sf.sech_fourier(rr, alpha) - q) / max(1.0, abs(q)))
    res["K_r and Fourier"] = max(kr)
    dt = time.time() - t0
    ok = (res["x-independence"] <= 1e-8 and res["quadruple symmetry"] <= 1e-8 and res["factor conjugation"] <= 1e-12
          and res["Wronskian"] <= 1e-8 and bad == 0 and res["K_r and Fourier"] <= 1e-9 and dt <= 120)
    report(9, ok, ", ".join(f"{k} {v:.1e}" for k, v in res.items()) + f", V1 parity/zeros failures {bad}, {dt:.1f}s")
    assert ok
