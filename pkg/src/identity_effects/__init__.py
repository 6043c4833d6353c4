"""Identity-disclosure detection and matched difference-in-differences effects."""

__version__ = "0.1.0"

from .events import (ActivityEvent, FilterPolicy, ParseError, ProfileTimeline,
                     build_timelines, filter_users, parse_events, read_events,
                     write_events)
from .taxonomy import (CohortStatus, CompiledTaxonomy, IdentityLabel,
                       IdentityTaxonomy, TaxonomyError, classify_user,
                       compile_taxonomy, evaluate_labeler, load_taxonomy)
from .jenks import jenks_breaks
from .matching import (BalanceReport, CovariateVector, MatchSet, PropensityModel,
                       Stratum, fit_propensity, score, smd, stratify_and_match)
from .panel import (EgoGraph, PanelObservation, ScoreTable, assemble_panel,
                    build_ego_network, count_offensive_replies, count_outcomes)
from .estimation import (EffectReport, FitResult, ModelSpec, effect_percent,
                         fit_nb_gee, holm_correct, run_experiment)
from .distances import (cohens_d, fit_pca_axis, js_distance, project, shift_report,
                        spearman)
from .synth import (SynthConfig, emit_network_scenario, generate, generate_cohort,
                    generate_network, load_scenario)

__all__ = [name for name in dir() if not name.startswith("_")]
