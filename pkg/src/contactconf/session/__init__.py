from .orchestrator import (
    ScriptSegment,
    SegmentResult,
    Session,
    SessionPhase,
    WarmStartParams,
)

__all__ = [
    "ScriptSegment",
    "SegmentResult",
    "Session",
    "SessionPhase",
    "WarmStartParams",
]
