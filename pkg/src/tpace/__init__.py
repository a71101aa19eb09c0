"""Tipping point analysis by counterfactual elicitation for two-phase oncology trials."""
from .counterfactual import (
    CensoringKind,
    CensoringModel,
    Effect,
    EventModel,
    RpsftParams,
    counterfactual_effect1,
    counterfactual_effect2,
    fit_censoring_model,
    fit_event_model,
)
from .cox import CoxFit, PhaseCoxFit, cox_fit, cox_ph, cox_timevarying_fit, split_episodes
from .data import SubjectRecord, TimeDoublet, TrialDataset
from .errors import DataError, DegenerateDataError, ModelError, NumericalError, ParameterError, TpaceError
from .io import emit_report, parse_dataset_csv, write_dataset_csv
from .simulate import SimConfig, brocade_like_config, simulate_brocade_like, simulate_trial
from .survival import KMCurve, LogRankResult, km_estimate, logrank_test, mdd
from .tipping import (
    ContributionIndices,
    Models,
    SearchConfig,
    TippingCurvePoint,
    TippingReport,
    TpaceConfig,
    contribution_indices_effect1,
    efficacy_indices_effect2,
    evaluate_lambda,
    find_tipping_point,
    fit_models,
    run_tpace,
)

__version__ = "0.1.0"
