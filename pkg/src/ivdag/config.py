"""Hyperparameter defaults shared across the estimation pipeline."""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Hyperparams:
    """Tuning knobs for the sparse solvers and the testing pipeline.

    tau            truncation level of the nonconvex penalty surrogate;
                   None resolves to sqrt(log(max(dim, n)) / n) per problem.
    kappa_max      cap on the reduced-form support sweep; None -> 3 * p.
    dim_penalty    extra per-coefficient selection penalty in units of
                   log(max(dim, n)); 0 gives the classical Gaussian BIC.
    normal_threshold
                   hypothesis-set size at which the likelihood-ratio test
                   switches from the chi-squared to the normal reference.
    """

    tau: float | None = None
    kappa_max: int | None = None
    dim_penalty: float = 0.0
    lambda_points: int = 50
    lambda_min_ratio: float = 1e-4
    cd_tol: float = 1e-8
    cd_max_sweeps: int = 10_000
    dc_max_iter: int = 30
    exhaustive_limit: int = 12
    # the penalty path stops descending once every penalized block's support
    # reaches this size; model choice never selects denser fits anyway
    path_support_cap: int = 60
    ridge: float = 1e-8
    normal_threshold: int = 50

    def with_overrides(self, **kwargs) -> "Hyperparams":
        return replace(self, **kwargs)


# The classical log(n)-per-coefficient BIC over-selects once a few hundred
# candidate columns compete for a slot; the added log-dimension term keeps
# false inclusions rare at the design sizes the pipeline targets.
PIPELINE_DEFAULTS = Hyperparams(dim_penalty=4.0)
