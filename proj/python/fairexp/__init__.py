"""Python bindings for the fairexp simulator."""

from ._fairexp import (
    ConfigError,
    Error,
    InfeasibleTemplateError,
    ValidationError,
    cumulative_ndcg,
    fair_swap,
    ndcg_at_k,
    ndcg_at_k_pool,
    pairwise_regret,
    run,
    simulate_clicks,
    summary_text,
    template_exposure,
)


def _stringify(settings):
    return {str(k): str(v).lower() if isinstance(v, bool) else str(v) for k, v in settings.items()}


def run_experiment(**settings):
    """Run one experiment; keyword names are the config-file keys."""
    return run(_stringify(settings))


__all__ = [
    "ConfigError",
    "Error",
    "InfeasibleTemplateError",
    "ValidationError",
    "cumulative_ndcg",
    "fair_swap",
    "ndcg_at_k",
    "ndcg_at_k_pool",
    "pairwise_regret",
    "run",
    "run_experiment",
    "simulate_clicks",
    "summary_text",
    "template_exposure",
]
