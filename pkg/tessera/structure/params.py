from pydantic import BaseModel, ConfigDict, Field

DEFAULT_M_U = 64


class Hyperparams(BaseModel):
    """Per-node clustering knobs.

    `lambda` is a keyword in Python so the attribute is `lambda_` while every serialized form
    (config files, snapshots) uses the plain `lambda` key.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    epsilon: float = Field(default=0.3, ge=0.0, le=1.0)
    lambda_: float = Field(default=1e-2, gt=0.0, alias="lambda")
    mu: float = Field(default=10.0, gt=0.0)
    t_gap: int = Field(default=20, ge=1)
    m_u: int = Field(default=DEFAULT_M_U, ge=1)
    # Matching (and merge-on-finalize) only happens once the store holds more than this many models
    min_models_for_matching: int = Field(default=2, ge=0)

    @property
    def removal_threshold(self) -> float:
        return 2.0 ** (-self.lambda_ * self.t_gap)
