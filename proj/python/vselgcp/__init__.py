"""Log-Gaussian Cox process models whose sampling effort decays with road distance."""

from ._core import (
    Fit,
    GridSpec,
    dic,
    distances_to_roads,
    ecdf,
    fit,
    ks_two_sample,
    lpml,
    pearson_corr,
    q_probability,
    simstudy,
    simulate_lgcp,
    simulate_matern_field,
    synthetic_domain,
    thin,
    waic,
)

__all__ = [
    "Fit",
    "GridSpec",
    "dic",
    "distances_to_roads",
    "ecdf",
    "fit",
    "ks_two_sample",
    "lpml",
    "pearson_corr",
    "q_probability",
    "simstudy",
    "simulate_lgcp",
    "simulate_matern_field",
    "synthetic_domain",
    "thin",
    "waic",
]
