"""Desk-scale sum-product toolkit.

Integers become exponent vectors over a prime basis, so product sets are
lattice sumsets.  On top of that sit graph-restricted sumsets, Lambda(q)
estimates for trigonometric polynomials, a bipartite-graph regularization
pipeline with measured ledgers, and a numeric calculus of admissible bound
pairs.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .exponent_lattice import (ExpSet, PrimeBasis, align, embed_set, evaluate, factorize,
                               is_injective_on, log_value, prime_factors, project, random_expset)
from .setops import (BipartiteGraph, IntSet, additive_energy, difference_set, doubling_constant,
                     energy_sumset_bound, graph_sumset, iterated_sumset, product_set, product_set_exp,
                     quotient_set, random_graph, representation_counts, ruzsa_audit, sumset)
from .lambda_q import (CoefficientVector, LambdaEstimate, TorusGrid, lambda_lower_bound, lq_norm,
                       prop1_ratio, trig_norm)
from .regularize import (bsg_extract, choose_split, dyadic_fiber_regularize, fact1_extract,
                         fiber_profile, freiman_audit, freiman_dimension,
                         select_injective_coords, step1_density_regularize, step5_graph_regularize,
                         step7_refine)
from .regularize_audit import audit_regularization
from .bounds import (AdmissiblePair, Constants, base_pair, check_admissible, compute_k_of_b,
                     compute_Lambda, lemma43_pair, lemma51_pair, pigeonhole_chain, theorem_driver,
                     transform_pair)
from .harness import FamilySpec, generate_family, parse_family, run_growth_experiment, verify_suite
