"""Dataset-free benchmark harness with a pluggable token-model backend."""

from .backend import BackendServer, ExternalBackend, serve
from .context import (
    CONTEXT_MARKER,
    CentralContext,
    build_prompt,
    compliance_checks,
    compliance_score,
    sentences,
)
from .decoding import DecodeConfig, TokenModel, generate_with_probs, nucleus, top_p_sample
from .metrics import (
    collision_rate,
    fisher_rao,
    hash64,
    jaccard_similarity,
    kl_divergence,
    shannon_entropy,
    top1,
    words,
)
from .runner import (
    BenchConfig,
    BenchResult,
    SummaryRow,
    TraceRow,
    plot_series,
    read_trace,
    run_benchmark,
    write_plot_series,
    write_summary,
    write_trace,
)
from .toy import ToyModel

__all__ = [
    "BackendServer", "BenchConfig", "BenchResult", "CONTEXT_MARKER", "CentralContext", "DecodeConfig",
    "ExternalBackend", "SummaryRow", "TokenModel", "ToyModel", "TraceRow", "build_prompt",
    "collision_rate", "compliance_checks", "compliance_score", "fisher_rao", "generate_with_probs",
    "hash64", "jaccard_similarity", "kl_divergence", "nucleus", "plot_series", "read_trace",
    "run_benchmark", "sentences", "serve", "shannon_entropy", "top1", "top_p_sample", "words",
    "write_plot_series", "write_summary", "write_trace",
]  # fmt: skip
