from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from physics.asymptotics import scaling_regimes
from physics.config import settings
from physics.errors import ConfigError
from physics.geometry import BodySpec, ShapeFamily
from physics.materials import MaterialParams


class SweepPoint(NamedTuple):
    index: int
    eps: float
    delta: Optional[float] = None


class ExperimentConfig(BaseModel):
    # Shapes
    family: ShapeFamily = ShapeFamily.SPHERE
    m: int = Field(2, ge=2)
    a1: float = Field(1.0, gt=0)
    a2: float = Field(1.0, gt=0)
    axes: Optional[tuple[float, float, float]] = None

    # Gap: a single value, a log-spaced sweep, or a coupled eps(delta) sweep
    eps: Optional[float] = Field(None, gt=0)
    eps_sweep: Optional[tuple[float, float, int]] = None
    delta_sweep: Optional[tuple[float, float, int]] = None
    beta: Optional[float] = Field(None, gt=0, lt=1)

    # Materials, either direct (delta, vb) or the four bulk parameters
    delta: Optional[float] = Field(None, gt=0, lt=1)
    vb: Optional[float] = Field(None, gt=0)
    rho: Optional[float] = Field(None, gt=0)
    rho_b: Optional[float] = Field(None, gt=0)
    kappa: Optional[float] = Field(None, gt=0)
    kappa_b: Optional[float] = Field(None, gt=0)

    # Numerics and output
    level: int = Field(default_factory=lambda: settings.MESH_LEVEL, ge=0)
    grading: Optional[float] = Field(None, gt=1, le=3)
    depth: Optional[int] = Field(None, ge=0)
    tol: Optional[float] = Field(None, gt=0)
    oracle: bool = False
    out: Optional[Path] = None
    records: Optional[Path] = None
    workers: Optional[int] = Field(None, ge=1)

    model_config = {"extra": "forbid", "frozen": True}

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        for name in ("eps_sweep", "delta_sweep"):
            sweep = getattr(self, name)
            if sweep is None:
                continue
            start, stop, count = sweep
            if count < 1:
                raise ValueError(f"{name} count must be >= 1")
            if start <= 0 or stop <= 0:
                raise ValueError(f"{name} bounds must be positive")
        if self.delta_sweep is not None:
            if self.beta is None:
                raise ValueError("a coupled delta sweep needs beta")
            if not (0 < self.delta_sweep[0] < 1 and 0 < self.delta_sweep[1] < 1):
                raise ValueError("delta sweep must stay inside (0, 1)")
        bulk = (self.rho, self.rho_b, self.kappa, self.kappa_b)
        if any(v is not None for v in bulk) and any(v is None for v in bulk):
            raise ValueError("give all of rho, rho_b, kappa, kappa_b or none of them")
        if self.family == ShapeFamily.ELLIPSOID and self.axes is None:
            raise ValueError("the ellipsoid family needs --axes")
        if self.family == ShapeFamily.SPHERE and self.m != 2:
            raise ValueError("the sphere family has m = 2")
        return self

    def bodies(self) -> tuple[BodySpec, BodySpec]:
        """Upper and lower body; ellipsoid runs use the same semiaxes for both."""
        if self.family == ShapeFamily.ELLIPSOID:
            body = BodySpec.ellipsoid(*self.axes)
            return body, body
        if self.family == ShapeFamily.SUPERELLIPSOID:
            return BodySpec.superellipsoid(self.a1, self.m), BodySpec.superellipsoid(self.a2, self.m)
        return BodySpec.sphere(self.a1), BodySpec.sphere(self.a2)

    def materials(self, delta: float | None = None) -> Optional[MaterialParams]:
        """Material parameters, with `delta` overriding the contrast of a coupled sweep row."""
        if delta is not None:
            return MaterialParams.from_contrast(delta, self.vb or 1.0)
        if self.rho is not None:
            return MaterialParams(rho=self.rho, rho_b=self.rho_b, kappa=self.kappa, kappa_b=self.kappa_b)
        if self.delta is not None:
            return MaterialParams.from_contrast(self.delta, self.vb or 1.0)
        return None

    @property
    def has_materials(self) -> bool:
        return self.delta_sweep is not None or self.rho is not None or self.delta is not None

    def sweep_points(self) -> list[SweepPoint]:
        """Sweep rows in input order: coupled sweep, then eps sweep, then the single eps."""
        if self.delta_sweep is not None:
            start, stop, count = self.delta_sweep
            deltas = np.geomspace(start, stop, int(count))
            eps = np.atleast_1d(scaling_regimes(self.m, deltas, self.beta))
            return [SweepPoint(i, float(e), float(d)) for i, (e, d) in enumerate(zip(eps, deltas, strict=True))]
        if self.eps_sweep is not None:
            start, stop, count = self.eps_sweep
            return [SweepPoint(i, float(e)) for i, e in enumerate(np.geomspace(start, stop, int(count)))]
        if self.eps is not None:
            return [SweepPoint(0, float(self.eps))]
        raise ConfigError("no gap given: use --eps, --eps-sweep or --delta-sweep with --beta")
