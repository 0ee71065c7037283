"""Heralded single-photon simulation and quantum non-Gaussianity analysis."""

__version__ = "0.1.0"

from .coincidence import (
    CoincidenceCounts,
    DelayHistogram,
    count_coincidences,
    delay_histogram,
    scan_windows,
    threefold_delay_histogram,
)
from .estimators import PhotonStats, estimate_probabilities, g2_zero
from .event_sim import SimConfig, simulate_stream
from .fock_oracle import (
    FockDistribution,
    LossModel,
    apply_loss,
    detection_outcome_probs,
    heralded_fock_distribution,
    squeezed_coherent_fock_probs,
    tmsv_joint_probs,
)
from .physics import (
    CavityParams,
    correlation_filtered,
    correlation_unfiltered,
    delay_pdf,
    gain_from_pump,
    upconversion_efficiency,
)
from .qng import (
    WitnessResult,
    evaluate_witness,
    gaussian_boundary,
    optimize_witness_parameter,
    predict_max_witness,
)
from .stream import Channel, DetectionEvent, EventStream, read_stream, write_stream
