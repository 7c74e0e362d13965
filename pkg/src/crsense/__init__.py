"""crsense: multi-channel energy-detection spectrum sensing under
direct-conversion receiver impairments (amplifier nonlinearity, LO phase
noise, I/Q imbalance), with a seeded Monte Carlo harness for ROC and
threshold-calibration studies."""

from .signal_model import (
    Baseband,
    ChannelPlan,
    OccupancyMap,
    ScenarioConfig,
    add_awgn,
    generate_signal,
)
from .rf_frontend import (
    ImpairmentConfig,
    IqiParams,
    NonlinearityParams,
    PhaseNoiseParams,
    apply_iqi,
    apply_nonlinearity,
    apply_phase_noise,
    bussgang_gain,
    front_end_chain,
    irr_from_mismatch,
    lo_phase_path,
    mismatch_from_irr,
)
from .detector import (
    DecisionVector,
    EnergyVector,
    ThresholdVector,
    channelize,
    decide,
    ideal_pd,
    ideal_pfa,
    ideal_threshold,
)
from .experiments import (
    PrecisionError,
    RocCurve,
    RocPoint,
    SpectrumStages,
    TrialBatch,
    calibrate_threshold,
    estimate_roc,
    pd_at_pfa,
    psd_stages,
    run_trials,
    sweep_impairment,
    trial_stream,
    wilson_interval,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .iqfile import DataError, RecordingHeader, iter_windows, read_header, write_recording

__version__ = "0.1.0"
