"""Generalized matrix problem laboratory."""

from .ensembles import (
    EnsembleComparison,
    GameReport,
    class_sums,
    ensemble_density_direct,
    ensemble_density_measured,
    game_distance,
    game_report,
    offpattern_max,
    product_start,
    real_side_keys,
    same_partition,
    side_keys,
    tuple_space,
    verify_densmatrix_lemma,
)
from .injectivity import HybridStep, MhInjReport, canonical_codes, hybrid_chain, mh_injectivity
from .instance import (
    GmpInstance,
    Preset,
    SecretDistribution,
    ddh,
    extended_lhs,
    lhs,
    lhs_independent,
    sample_gmp,
)
from .structured import (
    GoodFractionReport,
    GoodnessReport,
    StructuredReport,
    good_fraction,
    goodness,
    inner_product_laws,
    structured_distance,
)

__all__ = [
    "EnsembleComparison",
    "GameReport",
    "GmpInstance",
    "GoodFractionReport",
    "GoodnessReport",
    "HybridStep",
    "MhInjReport",
    "Preset",
    "SecretDistribution",
    "StructuredReport",
    "canonical_codes",
    "class_sums",
    "ddh",
    "ensemble_density_direct",
    "ensemble_density_measured",
    "extended_lhs",
    "game_distance",
    "game_report",
    "good_fraction",
    "goodness",
    "hybrid_chain",
    "inner_product_laws",
    "lhs",
    "lhs_independent",
    "mh_injectivity",
    "offpattern_max",
    "product_start",
    "real_side_keys",
    "same_partition",
    "sample_gmp",
    "side_keys",
    "structured_distance",
    "tuple_space",
    "verify_densmatrix_lemma",
]
