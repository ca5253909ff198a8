from pyncorm.datamodel.main import (
    DataConfig,
    EstimatorConfig,
    GammaPrior,
    KernelSpec,
    LevyMeasureSpec,
    ModelConfig,
    ObservationSet,
    OutputConfig,
    PriorSpec,
    RunConfig,
    SamplerConfig,
    ScoreModelSpec,
    SimulationSpec,
)
