from .fusion import FusionProfile, confidence, decision_fuse, fuse_outcome
from .reasoners import (
    DelayedReasoner,
    ReasonerBackend,
    RemoteReasoner,
    RuleReasoner,
    call_reasoner,
    remote_reasoner_call,
)
from .reports import (
    SCHEMA_VERSION,
    TOOL_SEQUENCE,
    Classification,
    Decision,
    EventType,
    FinalAlert,
    HypothesisReport,
    ReportError,
    Specialist,
    SpecialistReport,
)
from .roles import (
    SPECIALIST_ANALYZERS,
    SpecialistBackends,
    build_report,
    classify_flood,
    classify_wildfire,
    early_warning_assess,
    flood_specialist_analyze,
    quicklook_evidence,
    route,
    wildfire_specialist_analyze,
)
