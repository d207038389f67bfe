from pydantic_settings import BaseSettings, SettingsConfigDict
import os

class Settings(BaseSettings):
    # Raiz padrão dos diretórios de execução; pode ser sobrescrita por .env ou variáveis de ambiente
    OUTPUT_ROOT: str = "runs"
    LOG_LEVEL: str = "INFO"
    MAX_WORKERS: int = 1
    DEFAULT_SEED: int = 1234

    # Cluster environment detection
    ENVIRONMENT: str = "development"

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        # Auto-detect batch scheduler allotment
        cpus = os.getenv("SLURM_CPUS_PER_TASK")
        if cpus:
            self.ENVIRONMENT = "cluster"
            try:
                self.MAX_WORKERS = max(1, int(cpus))
            except ValueError:
                pass

        # Nunca menos de um worker
        if self.MAX_WORKERS < 1:
            self.MAX_WORKERS = 1

settings = Settings()
