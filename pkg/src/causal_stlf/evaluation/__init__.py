"""Rolling-origin evaluation, feature regimes, metrics and OOD diagnostics."""
from .compare import EvalConfig, EvalReport, derive_seed, fit_fold, run_regime_comparison
from .folds import Fold, FoldPlan, plan_folds
from .metrics import mae, mape, relative_error_reduction
from .ood import OodConfig, OodWindow, detect_ood_windows, evaluate_ood
from .regimes import REGIMES, FeatureRegime, resolve_regimes

__all__ = [
    "EvalConfig", "EvalReport", "derive_seed", "fit_fold", "run_regime_comparison",
    "Fold", "FoldPlan", "plan_folds", "mae", "mape", "relative_error_reduction",
    "OodConfig", "OodWindow", "detect_ood_windows", "evaluate_ood",
    "REGIMES", "FeatureRegime", "resolve_regimes",
]
