"""Multi-label inter-annotator agreement with bootstrap chance correction.

The scoring loops live in a small kernel with two interchangeable
implementations: a compiled extension (``_kernel_c``, built from Cython)
and a pure-Python mirror (``_kernel_py``). The fastest available one is
selected at import; see ``benchmarks/agreement_bench.py`` for a
comparison.
"""

from dialrel.agreement.backend import HAVE_COMPILED, available_backends, get_kernel
from dialrel.agreement.matrix import LabelMatrix
from dialrel.agreement.metrics import (
    METRIC_DISPLAY,
    METRICS,
    AgreementConfig,
    AgreementError,
    AgreementReport,
    DegenerateExpected,
    MetricAgreement,
    NoOverlap,
    adjust_kappa,
    agreement_report,
    build_plan,
    expected_metric_bootstrap,
    observed_metric,
    render_report_tsv,
    round_indices,
)

__all__ = [
    "HAVE_COMPILED",
    "available_backends",
    "get_kernel",
    "LabelMatrix",
    "METRIC_DISPLAY",
    "METRICS",
    "AgreementConfig",
    "AgreementError",
    "AgreementReport",
    "DegenerateExpected",
    "MetricAgreement",
    "NoOverlap",
    "adjust_kappa",
    "agreement_report",
    "build_plan",
    "expected_metric_bootstrap",
    "observed_metric",
    "render_report_tsv",
    "round_indices",
]
