"""FWM frequency-comb generation in HNLF and coincidence/CAR analysis of time tags."""

from .sigkit import Field, TemporalGrid, field_energy, make_grid, transform
from .dispersion import BetaSet, DispersionModel, fit_quadratic, taylor_betas
from .combgen import CombSpec, PumpSpec, synthesize_input
from .ssfm import FiberParams, propagate
from .fwmlab import calibrate, measure_sidebands, predict_lines
from .osa import Trace, compare_traces, emulate_osa
from .coincidence import TagStream, compute_car, correlogram, find_peak_train
from .tagsim import SourceModel, analytic_car, generate_tags

__version__ = "0.1.0"
