"""Four-stage chained scene-graph inference: prompts, parsing, backends."""

from .backends import (
    Backend,
    BackendRequest,
    BackendResponse,
    BackendTransportError,
    HttpBackend,
    MockBackend,
    ScriptExhaustedError,
)
from .examples import WORKED_EXAMPLES, WorkedExample
from .parsing import (
    SequenceParse,
    StageParse,
    parse_output_sequence,
    parse_stage,
    serialize_quintuples,
)
from .pipeline import (
    InferenceTranscript,
    PipelineBackendError,
    PipelineConfig,
    assemble_scene,
    run_pipeline,
    validate_transcript,
)
from .prompts import STAGE_HEADERS, PromptTemplate, SceneDescriptor, build_prompt

__all__ = [
    "Backend",
    "BackendRequest",
    "BackendResponse",
    "BackendTransportError",
    "HttpBackend",
    "MockBackend",
    "ScriptExhaustedError",
    "WORKED_EXAMPLES",
    "WorkedExample",
    "SequenceParse",
    "StageParse",
    "parse_output_sequence",
    "parse_stage",
    "serialize_quintuples",
    "InferenceTranscript",
    "PipelineBackendError",
    "PipelineConfig",
    "assemble_scene",
    "run_pipeline",
    "validate_transcript",
    "STAGE_HEADERS",
    "PromptTemplate",
    "SceneDescriptor",
    "build_prompt",
]
