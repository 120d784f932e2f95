"""Estimator suites behind the command line and the acceptance checks.

:class:`Suite` builds the pipeline from a :class:`RunConfig`, runs each
estimator once (results are cached) and evaluates the acceptance criteria
from those results.  Every random draw comes from a named Philox stream, so
results depend only on the configuration and seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .anosov_katok import invariant_set
from .config import RunConfig, pipeline_from_config, task_rng
from .hyperbolicity import ConeField, accessibility_reach, bunching_check, verify_cone_invariance
from .lyapunov import benettin_spectrum, estimate_center_plane
from .maps import (
    CAT_MAP,
    Identity,
    Linear,
    Product,
    eval_map,
    hyperbolic_eigen,
    jacobian_fd_check,
    max_abs_det_error,
)
from .perturbations import integrated_central_exponent, localization_ratio
from .survey import (
    NEGATIVE,
    ZERO,
    classify_phase_space,
    density_audit,
    k_invariance_audit,
    middle_pair,
    noise_floor,
    orbit_entry,
    survey_points,
)

Z99 = 2.5758293035489004
ACCESS_BASE_POINT = (0.3, 0.7)


@dataclass
class Criterion:
    key: str
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.key} ({self.name}): {self.detail}"


class Suite:
    def __init__(self, cfg: RunConfig, threads: int = 1):
        self.cfg = cfg
        self.threads = threads
        self.pipe = pipeline_from_config(cfg)
        self.region = self.pipe.region
        self.K = invariant_set(self.pipe.ak)
        self.lam, self.eu, self.es = hyperbolic_eigen(self.pipe.A)

    def rng(self, task: str) -> np.random.Generator:
        return task_rng(self.cfg.seed, task)

    @property
    def dim(self) -> int:
        return self.region.dim

    @property
    def center(self):
        return self.region.center

    @cached_property
    def sw_only(self):
        return self.pipe.with_gadgets(bm=Identity(self.dim), dw=Identity(self.dim))

    # --- build-time validation ------------------------------------------------

    def check_ak_clear_of_support(self, n: int = 4096) -> float:
        """Largest displacement of the AK conjugacy on the centre disk of
        radius ``eps/4`` about ``c``; must be exactly 0."""
        rng = self.rng("ak-clear")
        r = self.cfg.eps / 4 * np.sqrt(rng.random(n))
        t = 2 * np.pi * rng.random(n)
        c = np.asarray(self.region.c)
        Y = c + np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
        H = self.pipe.ak.stages[-1].conjugacy
        return float(np.abs(eval_map(H, Y) - Y).max())

    def volume_table(self):
        """(map, points, max ||det J| - 1|) with half of each sample in M^eps."""
        cfg = self.cfg
        rng = self.rng("volume")
        n = cfg.n_volume
        rows = []
        X2 = rng.random((n, 2))
        rows.append(("A", n, max_abs_det_error(Linear(self.pipe.A), X2)))
        X2 = np.concatenate([rng.random((n // 2, 2)), cfg.eps * rng.random((n - n // 2, 2))])
        rows.append(("T", n, max_abs_det_error(self.pipe.ak.T, X2)))
        X = np.concatenate(
            [self.region.sample(rng, n // 2, "torus"), self.region.sample(rng, n - n // 2, "M")]
        )
        for name, g in (("h", self.pipe.h), ("h_tilde", self.pipe.h_tilde), ("f", self.pipe.f)):
            rows.append((name, n, max_abs_det_error(g, X)))
        return rows

    def support_table(self):
        """(map, region, points, fixed bit-exactly)."""
        rng = self.rng("support")
        n = self.cfg.n_support
        rows = []
        for where in ("out-M", "V"):
            X = self.region.sample(rng, n, where)
            for name, g in (("h", self.pipe.h), ("h_tilde", self.pipe.h_tilde)):
                rows.append((name, where, n, bool(np.array_equal(eval_map(g, X), X))))
        return rows

    def validation_table(self):
        """(check, value, tolerance, passed) rows of the structural suite."""
        ak = self.pipe.ak
        rows = [(f"volume_{m}", v, 1e-8, v < 1e-8) for m, _, v in self.volume_table()]
        rows += [
            (f"support_{m}_{w}", float(ok), 1.0, ok) for m, w, _, ok in self.support_table()
        ]
        rng = self.rng("fd")
        X = self.region.sample(rng, 256, "M")
        fd = jacobian_fd_check(self.pipe.f, X, 1e-6)
        rows.append(("jacobian_fd_f", fd, 1e-6, fd < 1e-6))
        rows.append(("ak_period_defect", ak.period_defect, 1e-8, ak.period_defect < 1e-8))
        clear = self.check_ak_clear_of_support()
        rows.append(("ak_clear_of_support", clear, 0.0, clear == 0.0))
        rows.append(("k_measure", self.K.measure, 1 - self.cfg.eps, self.K.measure >= 1 - self.cfg.eps))
        for st in ak.closeness:
            rows.append(
                (f"ak_c0_stage{st['stage']}", st["c0"], st["c0_budget"], bool(st["within_budget"]))
            )
        return rows

    def trivial_gadgets(self) -> list[str]:
        return [
            name
            for name, g in (("sw", self.pipe.sw), ("bm", self.pipe.bm), ("dw", self.pipe.dw))
            if isinstance(g, Identity)
        ]

    # --- Lyapunov ----------------------------------------------------------------

    @cached_property
    def oracle(self):
        n = self.cfg.spectrum_n
        rng = self.rng("oracle")
        cat = benettin_spectrum(Linear(CAT_MAP), rng.random(2), n)
        AI = Product(Linear(self.pipe.A), Identity(self.dim - 2))
        ai = benettin_spectrum(AI, rng.random(self.dim), n)
        return cat, ai

    def k_points(self, rng, n):
        X = self.region.sample(rng, n, "torus")
        X[:, list(self.center)] = self.K.sample(rng, n)
        return X

    @cached_property
    def sample_spectra(self):
        """Per-sample spectra on ``A^eps`` and on ``T^2 x K``."""
        cfg = self.cfg
        rng = self.rng("lyapunov")
        sets = {"A": self.region.sample(rng, cfg.lyap_samples, "A"), "K": self.k_points(rng, cfg.lyap_samples)}
        U, S = self.pipe.hyperbolic_guesses
        checkpoints = [cfg.lyap_n * k // 10 for k in range(1, 11)]
        out = {}
        for name, X in sets.items():
            est = benettin_spectrum(self.pipe.f, X, cfg.lyap_n, 1, cfg.lyap_burn, checkpoints)
            plane = estimate_center_plane(
                self.pipe.f, X, cfg.n_plane, cfg.n_plane, self.center, U, S, residual=True
            )
            out[name] = (X, est, plane)
        return out

    def lyapunov_rows(self):
        rows = []
        for name, (X, est, plane) in self.sample_spectra.items():
            E = est.exponents
            c = middle_pair(E)
            for k in range(len(X)):
                rows.append(
                    (name, k, *X[k], est.n, est.burn_in, *E[k], E[k].sum(), *c[k],
                     plane.residual[k], bool(plane.resolved[k]), "middle-pair", self.cfg.seed)
                )
        return rows

    def lyapunov_header(self):
        d = self.dim
        return (
            ["set", "sample"] + [f"x{i}" for i in range(d)] + ["n", "burn_in"]
            + [f"lambda{i}" for i in range(d)]
            + ["zero_sum", "central1", "central2", "plane_residual", "plane_resolved", "central_method", "seed"]
        )

    def checkpoint_rows(self):
        rows = []
        for name, (X, est, _) in self.sample_spectra.items():
            for step in sorted(est.history):
                H = est.history[step]
                for k in range(len(X)):
                    rows.append((name, k, step, *H[k]))
        return rows

    # --- integrals -----------------------------------------------------------------

    @cached_property
    def integrals(self):
        cfg = self.cfg
        out = {}
        for label, p in (("sw-only", self.sw_only), ("full", self.pipe)):
            for where in ("M", "torus"):
                out[(label, where)] = integrated_central_exponent(
                    p, p.f_local, self.rng(f"integral-{label}-{where}"), where, cfg.n_integral, 1, cfg.n_plane
                )
        return out

    @cached_property
    def ratios(self):
        cfg = self.cfg
        return {
            label: localization_ratio(
                p, p.f_local, self.rng(f"ratio-{label}"), cfg.n_integral, cfg.n_outside, cfg.n_plane
            )
            for label, p in (("sw-only", self.sw_only), ("full", self.pipe))
        }

    # --- hyperbolicity and accessibility ---------------------------------------

    @cached_property
    def cone_reports(self):
        U, S = self.pipe.hyperbolic_guesses
        X = self.region.sample(self.rng("cones"), 2000, "M")
        cones = ConeField(U[:, :1], S[:, :1], 0.3, adapt=self.cfg.n_plane)
        rep = verify_cone_invariance(self.pipe.f, cones, X, 12)
        bun = bunching_check(self.pipe.f, X[:500], U, S, self.center, 24, self.cfg.n_plane)
        return rep, bun

    def reach(self, which: str):
        f = self.pipe.f if which == "pipeline" else self.pipe.F
        eps = self.cfg.eps
        leg = self.cfg.access_leg
        # on T^6 the second hyperbolic block stays at 0, a fixed point of A
        return accessibility_reach(
            f, np.array(ACCESS_BASE_POINT), eps / 4, 3 * eps / 4, self.cfg.access_grid,
            (leg, leg), self.eu, self.es, (0, 1), self.center,
        )

    @cached_property
    def reach_rasters(self):
        return {"pipeline": self.reach("pipeline"), "product": self.reach("product")}

    # --- elliptic set and survey ---------------------------------------------------

    @cached_property
    def k_audit(self):
        cfg = self.cfg
        T = self.pipe.ak.T
        good = k_invariance_audit(T, self.K, cfg.k_samples, cfg.k_time, self.rng("k-audit"))
        bad = k_invariance_audit(
            T, self.K.corrupted(cfg.eps / 2), min(cfg.k_samples, 2000), min(cfg.k_time, 200),
            self.rng("k-audit-corrupted"),
        )
        return good, bad

    def k_restriction_exact(self) -> bool:
        X = self.k_points(self.rng("k-restriction"), self.cfg.k_samples)
        return bool(np.array_equal(eval_map(self.pipe.f, X), eval_map(self.pipe.F, X)))

    @property
    def k_central_bound(self) -> float:
        """``log C / n`` with ``C`` the measured conjugacy derivative bound."""
        return float(np.log(self.pipe.ak.k_conjugacy_bound) / self.cfg.lyap_n)

    @cached_property
    def survey(self):
        cfg = self.cfg
        X = survey_points(self.dim, self.center, cfg.survey_center, cfg.survey_base)
        floor = noise_floor(self.pipe.F, X, cfg.survey_n, cfg.survey_burn, self.threads)
        threshold = cfg.threshold_factor * floor
        if threshold == 0.0:
            threshold = np.finfo(float).eps
        raster = classify_phase_space(
            self.pipe.f, cfg.survey_n, threshold, self.center, cfg.survey_center, cfg.survey_base,
            cfg.survey_burn, self.threads, dict(noise_floor=floor, seed=cfg.seed),
        )
        entry = orbit_entry(self.pipe.f, raster, cfg.survey_n, self.center)
        density = density_audit(raster, cfg.density_delta, entry)
        return raster, density, floor

    def a_cells(self, raster):
        C = raster.points[:, list(self.center)].reshape(raster.n_center, raster.n_center, 2)
        lo, hi = self.cfg.eps / 4, 3 * self.cfg.eps / 4
        return ((C >= lo) & (C <= hi)).all(axis=-1)

    # --- criteria --------------------------------------------------------------------

    def criterion_1(self) -> Criterion:
        rows = self.volume_table()
        worst = max(v for _, _, v in rows)
        ok = all(v < 1e-8 for _, _, v in rows)
        det = ", ".join(f"{m}={v:.2e}" for m, _, v in rows)
        return Criterion("1", "volume preservation", ok, f"max ||det J|-1| {det} (tol 1e-8)", dict(worst=worst))

    def criterion_2(self) -> Criterion:
        cat, ai = self.oracle
        g = np.log((3 + np.sqrt(5)) / 2)
        e_cat = float(np.abs(cat.exponents - np.array([g, -g])).max())
        la = np.log(self.lam)
        E = ai.exponents
        zeros = E[1:-1]
        e_ai = float(max(abs(E[0] - la), abs(E[-1] + la)))
        ok = e_cat < 1e-3 and e_ai < 1e-3 and bool(np.all(zeros == 0.0))
        return Criterion(
            "2", "spectrum oracle", ok,
            f"cat error {e_cat:.2e}, A x Id hyperbolic error {e_ai:.2e}, centre zeros exact: {bool(np.all(zeros == 0.0))}",
            dict(cat_error=e_cat, ai_error=e_ai),
        )

    def criterion_3(self) -> Criterion:
        sums = [np.abs(est.exponents.sum(axis=-1)).max() for est in self.oracle]
        sums += [est.zero_sum_error.max() for _, est, _ in self.sample_spectra.values()]
        worst = float(max(sums))
        return Criterion("3", "zero-sum conservation", worst < 1e-6, f"max |sum| {worst:.2e} (tol 1e-6)", dict(worst=worst))

    def criterion_4(self) -> Criterion:
        rows = self.support_table()
        ok = all(r[3] for r in rows)
        bad = [f"{m}@{w}" for m, w, _, fixed in rows if not fixed]
        return Criterion(
            "4", "support contracts", ok,
            f"h and h_tilde fix {rows[0][2]} points outside M^eps and in V bit-exactly" if ok else f"moved: {bad}",
        )

    def criterion_5(self) -> Criterion:
        I = self.integrals
        m, t = I[("full", "M")], I[("full", "torus")]
        lo, hi = m.interval(Z99)
        diff = abs(m.integral - t.integral)
        comb = Z99 * np.hypot(m.stderr, t.stderr)
        ok = hi < 0.0 and diff <= comb
        return Criterion(
            "5", "negative integrated central exponent", ok,
            f"M^eps integral {m.integral:.3e} 99% [{lo:.3e}, {hi:.3e}]; torus {t.integral:.3e}; |diff| {diff:.2e} <= {comb:.2e}",
            dict(integral=m.integral, lo=lo, hi=hi, torus=t.integral),
        )

    def criterion_6(self) -> Criterion:
        R = self.ratios
        a, b = R["sw-only"], R["full"]
        ok = a.passes(0.1) and b.passes(0.5)
        return Criterion(
            "6", "localization ratios", ok,
            f"sw-only {a.ratio:.2e}+{a.stderr:.1e} < 0.1; full {b.ratio:.2e}+{b.stderr:.1e} < 0.5",
            dict(sw_only=a.ratio, full=b.ratio),
        )

    def criterion_7(self) -> Criterion:
        R = self.reach_rasters
        p, c = R["pipeline"], R["product"]
        frac = p.significant_fraction
        control_zero = bool(
            (~c.failed).all() and np.all(c.magnitude <= 3.0 * c.error)
        )
        ok = frac >= 0.95 and control_zero
        return Criterion(
            "7", "accessibility evidence", ok,
            f"significant cells {frac:.3f} (need 0.95) of {p.magnitude.size}; product control zero within error: {control_zero}",
            dict(significant=frac),
        )

    def criterion_8(self) -> Criterion:
        good, bad = self.k_audit
        exact = self.k_restriction_exact()
        _, est, _ = self.sample_spectra["K"]
        cmax = float(np.abs(middle_pair(est.exponents)).max())
        bound = self.k_central_bound
        measure_ok = self.K.measure >= 1 - self.cfg.eps
        ok = good.fraction == 1.0 and measure_ok and exact and cmax <= bound
        return Criterion(
            "8", "elliptic set", ok,
            f"audit {good.fraction} over {good.n_samples}x{good.n_time} (corrupted {bad.fraction:.3f}); "
            f"measure(K) {self.K.measure:.6f} >= {1 - self.cfg.eps:.6f}; f = A x T on K bit-exact: {exact}; "
            f"max |central| on K {cmax:.2e} <= log C / n = {bound:.2e}",
            dict(audit=good.fraction, corrupted=bad.fraction, central=cmax),
        )

    def criterion_9(self) -> list[Criterion]:
        raster, density, floor = self.survey
        A = self.a_cells(raster)
        neg = raster.labels == NEGATIVE
        a_ok = bool(neg.any() and neg[A].all())
        cA = raster.central[A]
        zero_frac = raster.fraction(ZERO)
        lo, hi = raster.interval(ZERO)
        target = 1 - self.cfg.eps
        out = [
            Criterion(
                "9a", "negative-central class", a_ok,
                f"negative cells {int(neg.sum())}, A^eps cells negative {int(neg[A].sum())}/{int(A.sum())}; "
                f"A^eps central mean ({cA[:, 0].mean():+.4f}, {cA[:, 1].mean():+.4f}), threshold {raster.threshold:.2e}",
                dict(negative=int(neg.sum()), a_central=cA.mean(axis=0).tolist()),
            ),
            Criterion(
                "9b", "zero-central measure", hi >= target,
                f"zero-central {zero_frac:.4f} 95% [{lo:.4f}, {hi:.4f}] vs 1-eps {target:.2f}",
                dict(zero=zero_frac),
            ),
            Criterion(
                "9c", "density audit", density.pass_fraction >= 0.99,
                f"pass fraction {density.pass_fraction:.3f} at delta {density.delta} (need 0.99)",
                dict(pass_fraction=density.pass_fraction),
            ),
        ]
        _, est, _ = self.sample_spectra["K"]
        E = est.exponents
        la = np.log(self.lam)
        nb = (self.dim - 2) // 2
        hyp_err = float(max(np.abs(E[:, :nb] - la).max(), np.abs(E[:, -nb:] + la).max()))
        cmax = float(np.abs(middle_pair(E)).max())
        sig_ok = hyp_err < 1e-3 and cmax <= self.k_central_bound
        sig = "(+,+,0,0,-,-)" if self.dim == 6 else "(+,0,0,-)"
        out.append(
            Criterion(
                "9d", "spectrum signature on K", sig_ok,
                f"sorted spectrum {sig}: hyperbolic error {hyp_err:.2e} (tol 1e-3), max |central| {cmax:.2e}",
                dict(hyperbolic_error=hyp_err, central=cmax),
            )
        )
        return out

    def criteria(self) -> list[Criterion]:
        out = [getattr(self, f"criterion_{k}")() for k in range(1, 9)]
        return out + self.criterion_9()

