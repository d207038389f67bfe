from pydantic import BaseModel, Field, ConfigDict
from typing import Optional


class NoiseConfig(BaseModel):
    """Modelo de ruído em três níveis (1q, 2q, 3q+) mais inversão de leitura."""

    p_1q: float = Field(0.0, ge=0, lt=1)
    p_2q: float = Field(0.0, ge=0, lt=1)
    p_3q: float = Field(0.0, ge=0, lt=1)
    p_readout: float = Field(0.0, ge=0, lt=1)
    # Semente própria das falhas de porta; None segue a semente do backend
    seed: Optional[int] = None
    # Número de trajetórias estocásticas em que os shots são divididos
    trajectories: int = Field(64, ge=1)

    model_config = ConfigDict(extra="forbid", frozen=True)

    @property
    def is_noiseless(self) -> bool:
        return self.p_1q == 0 and self.p_2q == 0 and self.p_3q == 0 and self.p_readout == 0

    def gate_probability(self, n_qubits_involved: int) -> float:
        if n_qubits_involved <= 1:
            return self.p_1q
        if n_qubits_involved == 2:
            return self.p_2q
        return self.p_3q


# Presets (não são valores de hardware): o circuito de overlap, cheio de
# Toffolis controlados, degrada mais que o circuito do Hamiltoniano.
NOISE_PRESETS: dict[str, NoiseConfig] = {
    "none": NoiseConfig(),
    "default": NoiseConfig(p_1q=0.0005, p_2q=0.01, p_3q=0.03, p_readout=0.02),
    "readout_only": NoiseConfig(p_readout=0.02),
}
