"""Simulate and reconstruct Wigner functions measured with a parity-inverting Sagnac interferometer."""

from .field import (
    EnsembleState,
    FieldSpec,
    Grid,
    correlation,
    fresnel_propagate,
    make_grid,
    make_state,
    mix_states,
    spectral_intensity,
    total_power,
)
from .wigner import (
    PhasePoint,
    WignerMap,
    analytic_map,
    analytic_wigner,
    default_k_axis,
    marginal_k,
    marginal_x,
    wigner_at_point_parity,
    wigner_transform,
)
from .sagnac import (
    DetectorModel,
    InterferometerConfig,
    MirrorSetting,
    RateTriple,
    displace_state,
    interfere,
    parity_reflect,
    rotate_wavefront_90,
)
from .scan import CountMap, ScanConfig, expected_count_map, run_scan, sample_counts
from .reconstruct import (
    FeatureError,
    FeatureSet,
    ReconstructionReport,
    compare_maps,
    estimate_background,
    extract_features,
    reconstruct_wigner,
)
from .config import ConfigError, ExperimentConfig, load_config, preset_path

__version__ = "0.1.0"
