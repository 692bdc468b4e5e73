import math

from pydantic import BaseModel, Field


class MaterialParams(BaseModel):
    """Densities and bulk moduli of the background (rho, kappa) and the resonators (rho_b, kappa_b)."""

    rho: float = Field(gt=0)
    rho_b: float = Field(gt=0)
    kappa: float = Field(gt=0)
    kappa_b: float = Field(gt=0)

    model_config = {"frozen": True}

    @classmethod
    def from_contrast(cls, delta: float, v_b: float, v: float = 1.0) -> "MaterialParams":
        """Unit background density with the given contrast and wave speeds."""
        rho_b = delta
        return cls(rho=1.0, rho_b=rho_b, kappa=v**2, kappa_b=v_b**2 * rho_b)

    @property
    def delta(self) -> float:
        return self.rho_b / self.rho

    @property
    def v(self) -> float:
        return math.sqrt(self.kappa / self.rho)

    @property
    def v_b(self) -> float:
        return math.sqrt(self.kappa_b / self.rho_b)

    @property
    def tau(self) -> float:
        return self.v / self.v_b
