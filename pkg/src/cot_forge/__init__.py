"""Reasoning-chain parsing, composite rewards, rejection-sampled SFT data and
fixed-protocol evaluation for adaptive-depth emotion understanding."""

from .chain import DEFAULT_LEXICON, MarkerLexicon, extract_label, is_nonlinear, load_lexicon, parse_chain
from .client import EndpointConfig, ModelClient, complete, complete_batch
from .core import (
    CandidateResponse,
    GenerationConfig,
    LabelSpace,
    MarkerKind,
    ReasoningChain,
    RewardVector,
    Sample,
    Segment,
    TaskKind,
    default_label_space,
    deserialize_candidate,
    deserialize_sample,
    serialize_candidate,
    serialize_sample,
)
from .dataset import (
    BuildReport,
    StratumKey,
    build_sft_dataset,
    classify_stratum,
    dataset_stats,
    rejection_filter,
)
from .errors import (
    CotForgeError,
    EmptyEval,
    EmptyInput,
    EndpointError,
    InvalidBand,
    LabelOutOfRange,
    MalformedResponse,
    NoLabelFound,
    ParseError,
    ProtocolViolation,
)
from .evaluation import EvalResult, evaluate, macro_f1, render_report, weighted_f1
from .reward import (
    RewardConfig,
    Weights,
    accuracy_reward,
    composite_reward,
    depth_reward,
    diversity_reward,
    repetition_penalty,
    score_response,
    score_text,
)
from .service import ScoringService, serve

__version__ = "0.1.0"
