from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="GAPLAB_",
        extra="ignore",
    )

    # Meshing
    MESH_LEVEL: int = 3
    GRADING: float = 1.6
    GRADING_DEPTH: int = 6

    # Assembly and solve
    NEAR_FIELD_FACTOR: float = 2.0
    MAX_SUBDIVISION: int = 6
    ASSEMBLY_BLOCK: int = 256
    ASSEMBLY_WORKERS: int = 1
    CONDITION_LIMIT: float = 1e12

    # Sweeps and oracle
    SWEEP_WORKERS: int = 1
    ORACLE_TOL: float = 1e-12
    ORACLE_MAX_TERMS: int = 2_000_000
    PROBE_SEED: int = 12345

    LOG_LEVEL: str = "INFO"


settings = Settings()
