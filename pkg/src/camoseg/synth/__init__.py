from .oracles import (
    OracleDetectorProvider,
    OracleFlowProvider,
    OracleKnobs,
    OracleTrackerProvider,
    make_oracle_providers,
)
from .scene import GeneratedScene, SceneError, SceneScript, generate

__all__ = [
    "GeneratedScene",
    "OracleDetectorProvider",
    "OracleFlowProvider",
    "OracleKnobs",
    "OracleTrackerProvider",
    "SceneError",
    "SceneScript",
    "generate",
    "make_oracle_providers",
]
