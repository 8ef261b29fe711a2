from .quantile import OnlineQuantile, quantile_update
from .wrench_cone import ModeEstimate, WrenchConeEstimator, WrenchConeSnapshot
from .kinematics import KinematicEstimator, KinematicSnapshot, RegressionAccumulator

__all__ = [
    "OnlineQuantile",
    "quantile_update",
    "ModeEstimate",
    "WrenchConeEstimator",
    "WrenchConeSnapshot",
    "KinematicEstimator",
    "KinematicSnapshot",
    "RegressionAccumulator",
]
