"""Flat ``key = value`` run configuration, per-task random streams and the
pipeline builder driven by a configuration.

Lists are comma separated.  Lines starting with ``#`` and blank lines are
ignored.  Every key is documented in ``KEY_DOCS``.
"""

from __future__ import annotations

import hashlib
import zlib
from dataclasses import dataclass, fields, replace

import numpy as np

from .anosov_katok import StageParams, default_ak_map
from .perturbations import AccessParams, RotationParams, ShearParams, build_pipeline


class ConfigError(ValueError):
    pass


KEY_DOCS = {
    "eps": "size of the perturbation square [0, eps]^2 in the centre torus; (0, 0.5)",
    "A": "hyperbolic base matrix, row-major integers a,b,c,d with determinant 1",
    "variant": "t4 (T^2 x T^2) or t6 (T^4 x T^2 with a second copy of A)",
    "seed": "non-negative integer seed of the Philox streams",
    "ak_q": "stage periods q_1, q_2, ...; each divides the next",
    "ak_width": "twist ramp widths per stage (ignored for stages without gadget)",
    "ak_angle": "twist plateau angles per stage",
    "ak_phase": "twist row phases per stage",
    "ak_height": "twist row heights per stage, as fractions of eps",
    "ak_subdivision": "twists per lane period per stage (0 = no gadget)",
    "ak_vertical_degree": "winding of the vertical ramp of the rearrangement",
    "ak_horizontal_degree": "winding of the horizontal ramp of the rearrangement",
    "sw_amplitude": "base shear amplitude of the coupling gadget; >= 0",
    "sw_twist": "centre twist angle of the coupling gadget",
    "bm_angle": "centre rotation angle driven by the base annulus",
    "dw_amplitude": "twist angle of the accessibility gadget",
    "n_volume": "random points per map for the volume check",
    "n_support": "points outside M^eps and in V for the support check",
    "n_integral": "Monte Carlo samples per integral (>= 1000)",
    "n_outside": "samples outside A^eps for the localisation ratio",
    "n_plane": "forward/backward steps of the centre-plane estimator",
    "spectrum_n": "time horizon of the spectrum oracle runs",
    "lyap_samples": "points of A^eps for the per-sample spectra",
    "lyap_n": "time horizon of per-sample spectra (multiple of the last q)",
    "lyap_burn": "discarded burn-in steps",
    "access_grid": "grid size of the su-quadrilateral raster over A^eps",
    "access_leg": "leg length of the su-quadrilaterals",
    "k_samples": "samples of the K-invariance audit",
    "k_time": "iterates of the K-invariance audit",
    "survey_center": "centre raster resolution of the survey",
    "survey_base": "base grid resolution paired with the survey cells",
    "survey_n": "time horizon of the survey (multiple of the last q)",
    "survey_burn": "burn-in of the survey",
    "threshold_factor": "classification threshold as a multiple of the noise floor",
    "density_delta": "block size of the density audit",
}


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",") if v.strip())


@dataclass(frozen=True)
class RunConfig:
    eps: float = 0.2
    A: tuple[int, ...] = (5, 3, 3, 2)
    variant: str = "t4"
    seed: int = 0
    ak_q: tuple[int, ...] = (2, 12, 120)
    ak_width: tuple[float, ...] = (0.04, 0.01, 0.02)
    ak_angle: tuple[float, ...] = (0.8, 0.8, 0.8)
    ak_phase: tuple[float, ...] = (0.1, 0.0, 0.0)
    ak_height: tuple[float, ...] = (0.5, 0.88, 0.5)
    ak_subdivision: tuple[int, ...] = (1, 1, 0)
    ak_vertical_degree: int = 8
    ak_horizontal_degree: int = 3
    sw_amplitude: float = 0.4
    sw_twist: float = 1.0
    bm_angle: float = float(np.pi / 2)
    dw_amplitude: float = 0.3
    n_volume: int = 10000
    n_support: int = 10000
    n_integral: int = 20000
    n_outside: int = 20000
    n_plane: int = 30
    spectrum_n: int = 10000
    lyap_samples: int = 32
    lyap_n: int = 2400
    lyap_burn: int = 240
    access_grid: int = 8
    access_leg: float = 0.02
    k_samples: int = 10000
    k_time: int = 1000
    survey_center: int = 64
    survey_base: int = 16
    survey_n: int = 2400
    survey_burn: int = 240
    threshold_factor: float = 5.0
    density_delta: float = 0.1

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(0.0 < self.eps < 0.5, "eps must lie in (0, 0.5)")
        need(len(self.A) == 4, "A needs four entries")
        a, b, c, d = self.A
        need(a * d - b * c == 1 and abs(a + d) > 2, "A must be hyperbolic with determinant 1")
        need(self.variant in ("t4", "t6"), "variant must be t4 or t6")
        need(self.seed >= 0, "seed must be non-negative")
        n = len(self.ak_q)
        need(n >= 1, "need at least one stage")
        for name in ("ak_width", "ak_angle", "ak_phase", "ak_height", "ak_subdivision"):
            need(len(getattr(self, name)) == n, f"{name} needs {n} entries")
        need(all(q > 0 for q in self.ak_q), "stage periods must be positive")
        need(all(q2 % q1 == 0 for q1, q2 in zip(self.ak_q, self.ak_q[1:])), "each q must divide the next")
        need(all(0.0 < h < 1.0 for h in self.ak_height), "stage heights must lie in (0, 1)")
        need(self.ak_vertical_degree >= 1 and self.ak_horizontal_degree >= 1, "ramp degrees must be >= 1")
        need(self.sw_amplitude >= 0.0, "sw_amplitude must be non-negative")
        for name in ("n_volume", "n_support", "n_outside", "lyap_samples", "k_samples", "k_time", "access_grid"):
            need(getattr(self, name) >= 1, f"{name} must be positive")
        need(self.n_integral >= 1000, "n_integral must be at least 1000")
        need(self.n_plane >= 1 and self.spectrum_n >= 1, "horizons must be positive")
        need(self.lyap_n >= 1 and self.survey_n >= 1, "horizons must be positive")
        need(self.lyap_burn >= 0 and self.survey_burn >= 0, "burn-in must be non-negative")
        need(0.0 < self.access_leg < 0.5, "access_leg must lie in (0, 0.5)")
        need(self.survey_center >= 2 and self.survey_base >= 1, "survey grids too small")
        need(self.threshold_factor > 0.0, "threshold_factor must be positive")
        need(0.0 < self.density_delta <= 1.0, "density_delta must lie in (0, 1]")

    # serialisation -----------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                s = ",".join(repr(x) for x in v)
            else:
                s = repr(v) if not isinstance(v, str) else v
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for k, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {k}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {k}: unknown key {key!r}")
            kw[key] = _parse(types[key], val, key)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.A, dtype=np.int64).reshape(2, 2)

    @property
    def center(self) -> tuple[int, int]:
        return (2, 3) if self.variant == "t4" else (4, 5)


def _parse(typ, val: str, key: str):
    try:
        if typ in ("float", float):
            return float(val)
        if typ in ("int", int):
            return int(val)
        if typ in ("str", str):
            return val
        if "int" in str(typ):
            return _ints(val)
        return _floats(val)
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {val!r}") from e


def stage_params(cfg: RunConfig) -> tuple[StageParams, ...]:
    return tuple(
        StageParams(q=q, subdivision=s, width=w, angle=a, phase=p, height=h)
        for q, w, a, p, h, s in zip(
            cfg.ak_q, cfg.ak_width, cfg.ak_angle, cfg.ak_phase, cfg.ak_height, cfg.ak_subdivision
        )
    )


def pipeline_from_config(cfg: RunConfig):
    ak = default_ak_map(
        cfg.eps, stage_params(cfg), cfg.ak_vertical_degree, cfg.ak_horizontal_degree
    )
    return build_pipeline(
        cfg.eps,
        cfg.variant,
        cfg.matrix,
        ShearParams(amplitude=cfg.sw_amplitude, twist=cfg.sw_twist),
        RotationParams(angle=cfg.bm_angle),
        AccessParams(amplitude=cfg.dw_amplitude),
        ak,
    )


def task_rng(seed: int, task: str) -> np.random.Generator:
    """Philox stream keyed by ``(seed, crc32(task))``; portable across runs."""
    key = (zlib.crc32(task.encode()) << 64) | (seed & ((1 << 64) - 1))
    return np.random.Generator(np.random.Philox(key=key))
