"""Label-guided robustness verification for ReLU feed-forward networks."""

from .backends import JRobustnessQuery, JStatus, JVerdict, validate_counterexample, verify_complete, verify_incomplete
from .interval import Interval
from .network import TIE, LabeledInput, Layer, Network, forward, input_box, load_dataset, load_network, predict_label
from .orchestrator import RobustnessVerdict, Status, VerifyConfig, verify_baseline, verify_robustness
from .symbolic import propagate

__version__ = "0.1.0"

__all__ = [
    "Interval", "Layer", "Network", "LabeledInput", "TIE", "forward", "predict_label", "input_box",
    "load_network", "load_dataset", "propagate", "JRobustnessQuery", "JStatus", "JVerdict",
    "verify_incomplete", "verify_complete", "validate_counterexample", "VerifyConfig",
    "RobustnessVerdict", "Status", "verify_robustness", "verify_baseline",
]
