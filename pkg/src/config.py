from dotenv import load_dotenv
import os
import logging

from utils.errors import ConfigurationError

load_dotenv()

logger = logging.getLogger('beam_qtl.config')


def _env_int(name, default):
    raw = os.getenv(name)
    if raw is None or raw == '':
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be an integer, got {raw!r}")


def _env_flag(name, default):
    raw = os.getenv(name)
    if raw is None or raw == '':
        return default
    return raw.strip().lower() not in ('0', 'false', 'no', 'off')


class Config:
    # Runtime settings (overridable from .env / environment)
    OUTPUT_DIR = os.getenv('BEAM_QTL_OUTPUT_DIR', 'outputs')
    LOG_DIR = os.getenv('BEAM_QTL_LOG_DIR', 'logs')
    LOG_LEVEL = os.getenv('BEAM_QTL_LOG_LEVEL', 'INFO')
    WORKERS = _env_int('BEAM_QTL_WORKERS', 1)
    PROGRESS = _env_flag('BEAM_QTL_PROGRESS', True)

    # Beam SNR measurement layout
    N_FEATURES = 36  # beam SNRs per Wi-Fi station
    N_CLASSES = 8    # poses
    SOURCE_SESSIONS = (0, 1, 2, 3)
    TARGET_SESSIONS = (4, 5, 6)

    # Pose-wise sample counts, used as class proportions only
    SOURCE_CLASS_COUNTS = (434, 499, 325, 347, 238, 314, 272, 432)
    TARGET_CLASS_COUNTS = (151, 149, 173, 129, 88, 96, 119, 135)
    SOURCE_DOMAIN_SIZE = 42915
    TARGET_DOMAIN_SIZE = 1040

    # Labeled subsets
    SOURCE_LABELED_COUNT = 129
    SOURCE_LABELED_COUNT_ALT = 104
    TARGET_LABELED_FRACTION = 0.1

    # Optimizer / training
    BATCH_SIZE = 100
    EPOCHS = 100
    LEARNING_RATE = 0.02
    WEIGHT_DECAY = 1e-4
    ADAM_BETAS = (0.9, 0.999)
    ADAM_EPS = 1e-8
    FINETUNE_EPOCHS = 50
    N_REPEATS = 5

    # QNN
    N_QUBITS = 10
    N_LAYERS = 1

    # DNN
    DNN_HIDDEN = 100
    DNN_RESIDUAL_BLOCKS = 3

    # Baselines
    KNN_K = 5
    GNB_VAR_FLOOR = 1e-9  # relative to the largest feature variance

    # Synthetic beam SNR generator
    ANCHOR_SCALE_DB = 5.0
    SHIFT_MEAN_OFFSET_SCALE = 1.0   # offset length in RMS anchor radii, before calibration
    SHIFT_GAIN_SPREAD = 0.1
    NOISE_SIGMA_SOURCE_DB = 6.0
    NOISE_SIGMA_TARGET_DB = 6.0
    # Nearest-anchor accuracy on the target domain that the default shift is scaled to
    SHIFT_REFERENCE_ACCURACY = 0.80
    SHIFT_SEARCH_MAX = 4.0
    SHIFT_SEARCH_STEPS = 160

    # Document formats
    CHECKPOINT_FORMAT_VERSION = 1
    METADATA_FORMAT_VERSION = 1
    SUMMARY_FORMAT_VERSION = 1

    @classmethod
    def validate(cls):
        """Validate numeric settings and environment overrides"""
        positive = [
            'BATCH_SIZE', 'EPOCHS', 'N_QUBITS', 'N_LAYERS', 'DNN_HIDDEN',
            'KNN_K', 'N_REPEATS', 'WORKERS',
        ]
        for key in positive:
            if getattr(cls, key) < 1:
                raise ConfigurationError(f"{key} must be >= 1, got {getattr(cls, key)}")
        for key in ('LEARNING_RATE', 'WEIGHT_DECAY', 'SHIFT_MEAN_OFFSET_SCALE',
                    'SHIFT_GAIN_SPREAD', 'NOISE_SIGMA_SOURCE_DB', 'NOISE_SIGMA_TARGET_DB'):
            if getattr(cls, key) < 0:
                raise ConfigurationError(f"{key} must be non-negative, got {getattr(cls, key)}")
        if not 0.0 < cls.SHIFT_REFERENCE_ACCURACY < 1.0:
            raise ConfigurationError("SHIFT_REFERENCE_ACCURACY must lie in (0, 1)")
        if cls.SHIFT_SEARCH_MAX <= 0 or cls.SHIFT_SEARCH_STEPS < 1:
            raise ConfigurationError("SHIFT_SEARCH_MAX and SHIFT_SEARCH_STEPS must be positive")
        if not 0.0 < cls.TARGET_LABELED_FRACTION <= 1.0:
            raise ConfigurationError("TARGET_LABELED_FRACTION must lie in (0, 1]")
        if logging.getLevelName(cls.LOG_LEVEL.upper()) == f"Level {cls.LOG_LEVEL.upper()}":
            raise ConfigurationError(f"Unknown log level: {cls.LOG_LEVEL}")
        logger.debug("Configuration validated")

    @classmethod
    def default_shift(cls, scale=1.0, seed=0):
        """Calibrated source->target shift, optionally scaled (scale=0 gives a null shift)

        The shift size is searched per dataset so a nearest-anchor classifier scores
        SHIFT_REFERENCE_ACCURACY on the target domain; ``scale`` then multiplies it.
        """
        from data_collection.synthetic import ShiftSpec

        if scale == 0:
            return ShiftSpec(0.0, 0.0, cls.NOISE_SIGMA_SOURCE_DB, cls.NOISE_SIGMA_TARGET_DB, seed=seed)
        return ShiftSpec(
            mean_offset_scale=cls.SHIFT_MEAN_OFFSET_SCALE,
            feature_gain_spread=cls.SHIFT_GAIN_SPREAD,
            noise_sigma_source=cls.NOISE_SIGMA_SOURCE_DB,
            noise_sigma_target=cls.NOISE_SIGMA_TARGET_DB,
            seed=seed,
            reference_accuracy=cls.SHIFT_REFERENCE_ACCURACY,
            strength=scale,
        )
