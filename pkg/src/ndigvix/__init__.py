"""Double-subordinated NDIG model, FFT pricing, volatility indices, long-memory filtering and tail ratios."""

from .calibration import CalibrationConfig, CalibrationResult, ReturnSeries, fit_ndig, rolling_fit
from .config import PipelineConfig
from .fracts import ArfimaParams, FigarchParams, TsFit, fit_arfima_figarch, frac_diff_coeffs
from .levy import IGParams, NDIGParams, ndig_cf, ndig_moments, ndig_simulate
from .pricing import PricerConfig, a_max, carr_madan_call, implied_vol
from .ratios import RatioConfig, avar, rachev_ratio, starr
from .scenarios import ScenarioConfig, simulate_scenarios

__all__ = [
    "ArfimaParams", "CalibrationConfig", "CalibrationResult", "FigarchParams", "IGParams", "NDIGParams",
    "PipelineConfig", "PricerConfig", "RatioConfig", "ReturnSeries", "ScenarioConfig", "TsFit", "a_max",
    "avar", "carr_madan_call", "fit_arfima_figarch", "fit_ndig", "frac_diff_coeffs", "implied_vol",
    "ndig_cf", "ndig_moments", "ndig_simulate", "rachev_ratio", "rolling_fit", "simulate_scenarios", "starr",
]
__version__ = "0.1.0"
